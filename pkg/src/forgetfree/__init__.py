from .core import Checkpoint
from .data import (
    Dataset,
    Task,
    TaskSequence,
    load_benchmark,
    load_features,
    load_idx,
    split_cil,
    write_features,
)
from .exceptions import (
    ConsistencyError,
    DataError,
    DivergenceError,
    ForgetFreeError,
    FormatError,
    NumericalError,
    RunError,
)
from .head import FisherState, OutputHead, init_closed_form
from .metrics import (
    AccuracyMatrix,
    RademacherEstimate,
    acc,
    bwt,
    fwt,
    rademacher_estimate,
    ridge_head_builder,
)
from .representation import (
    Activation,
    LayerConfig,
    NodeBlock,
    RandomLayerStack,
    Representation,
    init_stack,
)
from .solver import (
    ClampBounds,
    L1LsProblem,
    SolverSettings,
    SolverState,
    check_optimality,
    project_g,
    solve,
)

__all__ = [
    "Checkpoint",
    "Dataset",
    "Task",
    "TaskSequence",
    "load_benchmark",
    "load_features",
    "load_idx",
    "split_cil",
    "write_features",
    "ConsistencyError",
    "DataError",
    "DivergenceError",
    "ForgetFreeError",
    "FormatError",
    "NumericalError",
    "RunError",
    "FisherState",
    "OutputHead",
    "init_closed_form",
    "AccuracyMatrix",
    "RademacherEstimate",
    "acc",
    "bwt",
    "fwt",
    "rademacher_estimate",
    "ridge_head_builder",
    "Activation",
    "LayerConfig",
    "NodeBlock",
    "RandomLayerStack",
    "Representation",
    "init_stack",
    "ClampBounds",
    "L1LsProblem",
    "SolverSettings",
    "SolverState",
    "check_optimality",
    "project_g",
    "solve",
]
