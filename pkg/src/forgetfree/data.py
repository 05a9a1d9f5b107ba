"""
Contains code for loading datasets and splitting them into task sequences.
"""

import gzip
import logging
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .exceptions import ConsistencyError, DataError, FormatError
from .types import Labels, Matrix, PathType
from .utilities.validate import raise_for_fraction

logger = logging.getLogger(__name__)

# IDX magic numbers (big endian) and the gzip signature
IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
GZIP_MAGIC = b"\x1f\x8b"

# Standard file names inside a benchmark directory
IDX_FILES: dict[str, tuple[str, str]] = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
FEATURE_FILES: dict[str, tuple[str, str]] = {
    "train": ("train_features.bin", "train_labels.bin"),
    "test": ("test_features.bin", "test_labels.bin"),
}
BENCHMARK_KINDS: tuple[str, ...] = ("mnist", "fashion-mnist", "features")

# Largest number of unused class ids tolerated when inferring a class count
MAX_UNUSED_CLASSES = 1000

# MARK: Domain types


@dataclass(frozen=True, eq=False)
class Dataset:
    """Holds a pool of samples and their integer class labels."""

    inputs: Matrix
    labels: Labels
    class_count: int

    def __post_init__(self) -> None:
        """Standardizes the arrays and checks their invariants."""
        inputs = np.asarray(self.inputs, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if inputs.ndim != 2:
            raise ValueError(f"inputs must be a matrix, got {inputs.shape}")
        if labels.ndim != 1:
            raise ValueError(f"labels must be a vector, got {labels.shape}")
        if self.class_count < 1:
            raise ValueError(
                f"class_count must be positive, got {self.class_count}"
            )
        if inputs.shape[0] != labels.shape[0]:
            raise ConsistencyError(
                f"Got {inputs.shape[0]} input rows but {labels.shape[0]} "
                "labels"
            )
        if not np.all(np.isfinite(inputs)):
            raise DataError("inputs contain NaN or infinite values")
        if labels.size and (
            labels.min() < 0 or labels.max() >= self.class_count
        ):
            raise ConsistencyError(
                f"Labels must lie in [0, {self.class_count}), got values "
                f"from {labels.min()} to {labels.max()}"
            )
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        """Gets the number of samples."""
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        """Gets the number of values per sample."""
        return self.inputs.shape[1]

    def __len__(self) -> int:
        """Gets the number of samples."""
        return self.n_samples


@dataclass(frozen=True, eq=False)
class Task:
    """Holds the train and test data of one class-incremental task.

    Targets are one-hot rows over the global class count of the whole
    sequence, so every task writes to its own global class columns.
    """

    X_train: Matrix
    Y_train: Matrix
    X_test: Matrix
    Y_test: Matrix
    class_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        """Checks the task invariants."""
        if not self.class_ids:
            raise ValueError("A task must hold at least one class")
        for X, Y, split in [
            (self.X_train, self.Y_train, "train"),
            (self.X_test, self.Y_test, "test"),
        ]:
            if X.shape[0] != Y.shape[0]:
                raise ConsistencyError(
                    f"{split} split has {X.shape[0]} inputs but "
                    f"{Y.shape[0]} targets"
                )
            if Y.size and not np.all(Y.sum(axis=1) == 1):
                raise ConsistencyError(f"{split} targets are not one-hot")
            outside = set(np.flatnonzero(Y.any(axis=0))) - set(self.class_ids)
            if outside:
                raise ConsistencyError(
                    f"{split} targets use classes {sorted(outside)} outside "
                    f"the task classes {list(self.class_ids)}"
                )

    @property
    def n_samples(self) -> int:
        """Gets the number of training samples."""
        return self.X_train.shape[0]

    @property
    def labels_train(self) -> Labels:
        """Gets the training labels as global class indices."""
        return self.Y_train.argmax(axis=1)

    @property
    def labels_test(self) -> Labels:
        """Gets the test labels as global class indices."""
        return self.Y_test.argmax(axis=1)


@dataclass(frozen=True, eq=False)
class TaskSequence:
    """Holds an ordered sequence of class-incremental tasks."""

    tasks: tuple[Task, ...]
    ordering_seed: int
    class_count: int

    def __post_init__(self) -> None:
        """Checks that the tasks partition the class set."""
        seen: set[int] = set()
        for index, task in enumerate(self.tasks):
            if overlap := seen & set(task.class_ids):
                raise ConsistencyError(
                    f"Task {index} repeats classes {sorted(overlap)}"
                )
            seen.update(task.class_ids)
        if seen != set(range(self.class_count)):
            raise ConsistencyError(
                f"Tasks cover classes {sorted(seen)}, expected all of "
                f"0..{self.class_count - 1}"
            )

    @property
    def class_order(self) -> tuple[int, ...]:
        """Gets the classes in the order they are presented."""
        return tuple(c for task in self.tasks for c in task.class_ids)

    def cumulative_train(self, index: int) -> tuple[Matrix, Matrix]:
        """Gets the training data of tasks 0 through index stacked together."""
        tasks = self.tasks[: index + 1]
        X = np.concatenate([task.X_train for task in tasks])
        Y = np.concatenate([task.Y_train for task in tasks])
        return X, Y

    def __len__(self) -> int:
        """Gets the number of tasks."""
        return len(self.tasks)

    def __iter__(self) -> Iterator[Task]:
        """Iterates over the tasks in order."""
        return iter(self.tasks)

    def __getitem__(self, index: int) -> Task:
        """Gets a task by its position in the sequence."""
        return self.tasks[index]


# MARK: Helpers


def one_hot(labels: Labels, width: int) -> Matrix:
    """Encodes integer labels as one-hot rows of the given width."""
    encoded = np.zeros((len(labels), width), dtype=np.float64)
    encoded[np.arange(len(labels)), labels] = 1.0
    return encoded


def _read_bytes(path: PathType) -> bytes:
    """Reads a file, transparently decompressing gzip content."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] == GZIP_MAGIC:
        try:
            data = gzip.decompress(data)
        except (EOFError, gzip.BadGzipFile, zlib.error) as error:
            raise FormatError(
                f"{path} is not a readable gzip file: {error}"
            ) from error
    return data


def _decode(
    data: bytes,
    offset: int,
    dtype: str | np.dtype,
    count: int,
    path: PathType,
) -> np.ndarray:
    """Decodes count items starting at offset, refusing short payloads."""
    itemsize = np.dtype(dtype).itemsize
    payload = data[offset : offset + count * itemsize]
    if len(payload) < count * itemsize:
        raise FormatError(
            f"{path} is truncated: expected {count * itemsize} bytes of "
            f"data, found {len(payload)}"
        )
    if count == 0:
        return np.empty(0, dtype=dtype)
    return np.frombuffer(payload, dtype=dtype, count=count)


# MARK: Loaders


def load_idx(
    images_path: PathType,
    labels_path: PathType,
    class_count: int = 10,
) -> Dataset:
    """Loads an IDX image/label file pair such as MNIST or FashionMNIST.

    Either file may be gzip-compressed. Images are flattened row-major and
    pixel bytes are scaled to [0, 1].
    """

    # Parse the image header: magic, count, rows, columns
    images = _read_bytes(images_path)
    magic, count, rows, cols = _decode(images, 0, ">u4", 4, images_path)
    if magic != IMAGES_MAGIC:
        raise FormatError(
            f"{images_path} has magic number 0x{magic:08x}, expected "
            f"0x{IMAGES_MAGIC:08x}"
        )
    count, width = int(count), int(rows) * int(cols)
    pixels = _decode(images, 16, np.uint8, count * width, images_path)

    # Parse the label header: magic, count
    labels = _read_bytes(labels_path)
    magic, label_count = _decode(labels, 0, ">u4", 2, labels_path)
    if magic != LABELS_MAGIC:
        raise FormatError(
            f"{labels_path} has magic number 0x{magic:08x}, expected "
            f"0x{LABELS_MAGIC:08x}"
        )
    if int(label_count) != count:
        raise ConsistencyError(
            f"{images_path} holds {count} images but {labels_path} holds "
            f"{label_count} labels"
        )
    values = _decode(labels, 8, np.uint8, count, labels_path)

    logger.info("Loaded %d IDX samples of width %d", count, width)
    return Dataset(
        inputs=pixels.reshape(count, width).astype(np.float64) / 255.0,
        labels=values.astype(np.int64),
        class_count=class_count,
    )


def load_features(
    features_path: PathType,
    labels_path: PathType,
    class_count: int | None = None,
) -> Dataset:
    """Loads a pre-extracted feature file and its label file.

    The feature file starts with N and D as little-endian 64-bit unsigned
    integers followed by N * D little-endian 32-bit floats in row-major
    order. The label file holds one little-endian 64-bit unsigned integer
    per row. Values are passed through unscaled. If class_count is omitted
    it is inferred as the largest label plus one, as long as that leaves at
    most MAX_UNUSED_CLASSES class ids without a sample.
    """

    # Decode the feature matrix
    data = _read_bytes(features_path)
    n, d = (int(v) for v in _decode(data, 0, "<u8", 2, features_path))
    values = _decode(data, 16, "<f4", n * d, features_path)
    if len(data) != 16 + 4 * n * d:
        raise FormatError(
            f"{features_path} has {len(data) - 16 - 4 * n * d} trailing "
            "bytes"
        )
    if not np.all(np.isfinite(values)):
        raise DataError(f"{features_path} contains non-finite values")

    # Decode the labels
    label_data = _read_bytes(labels_path)
    if len(label_data) % 8:
        raise FormatError(
            f"{labels_path} length {len(label_data)} is not a multiple of 8"
        )
    if len(label_data) // 8 != n:
        raise ConsistencyError(
            f"{features_path} holds {n} rows but {labels_path} holds "
            f"{len(label_data) // 8} labels"
        )
    labels = _decode(label_data, 0, "<u8", n, labels_path).astype(np.int64)

    if class_count is None:
        class_count = _infer_class_count(labels, labels_path)
    logger.info("Loaded %d feature rows of width %d", n, d)
    return Dataset(
        inputs=values.reshape(n, d).astype(np.float64),
        labels=labels,
        class_count=class_count,
    )


def _infer_class_count(labels: Labels, path: PathType) -> int:
    """Infers the class count from the largest label."""
    if not labels.size:
        return 1
    inferred = int(labels.max()) + 1
    distinct = np.unique(labels).size
    if inferred - distinct > MAX_UNUSED_CLASSES:
        raise DataError(
            f"{path} has labels up to {inferred - 1} but only {distinct} "
            "distinct classes; pass class_count explicitly"
        )
    return inferred


def write_features(
    features_path: PathType,
    labels_path: PathType,
    dataset: Dataset,
) -> None:
    """Writes a dataset in the feature-file format read by load_features."""
    header = np.array(dataset.inputs.shape, dtype="<u8")
    with open(features_path, "wb") as f:
        f.write(header.tobytes())
        f.write(dataset.inputs.astype("<f4").tobytes())
    with open(labels_path, "wb") as f:
        f.write(dataset.labels.astype("<u8").tobytes())


def _resolve(directory: Path, name: str) -> Path:
    """Finds a benchmark file, accepting a gzip-compressed variant."""
    for candidate in [directory / name, directory / f"{name}.gz"]:
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"Missing {name}(.gz) in {directory}")


def load_benchmark(
    kind: str,
    directory: PathType,
    class_count: int | None = None,
) -> tuple[Dataset, Dataset]:
    """Loads the train and test datasets of a benchmark directory.

    The kinds 'mnist' and 'fashion-mnist' read the standard IDX file names;
    the kind 'features' reads train/test feature and label files.
    """
    if kind not in BENCHMARK_KINDS:
        raise ValueError(
            f"Unknown benchmark kind '{kind}', expected one of "
            f"{', '.join(BENCHMARK_KINDS)}"
        )
    directory = Path(directory)
    datasets = []
    for split in ["train", "test"]:
        if kind == "features":
            features, labels = FEATURE_FILES[split]
            datasets.append(
                load_features(
                    _resolve(directory, features),
                    _resolve(directory, labels),
                    class_count=class_count,
                )
            )
        else:
            images, labels = IDX_FILES[split]
            datasets.append(
                load_idx(
                    _resolve(directory, images),
                    _resolve(directory, labels),
                    class_count=class_count or 10,
                )
            )
    train, test = datasets
    if kind == "features" and class_count is None:
        # Both splits must agree on the class count
        count = max(train.class_count, test.class_count)
        train = Dataset(train.inputs, train.labels, count)
        test = Dataset(test.inputs, test.labels, count)
    return train, test


# MARK: Splitting


def split_cil(
    data: Dataset,
    num_tasks: int,
    ordering_seed: int,
    test_fraction: float = 0.2,
    test_data: Dataset | None = None,
) -> TaskSequence:
    """Splits a dataset into a class-incremental task sequence.

    Classes are shuffled with ordering_seed and cut into num_tasks groups of
    equal size. Test samples come from test_data when it is given, otherwise
    test_fraction of each task's samples is held out using a random stream
    separate from the class ordering.
    """

    # Validate the arguments
    if num_tasks < 1:
        raise ValueError(f"num_tasks must be positive, got {num_tasks}")
    if data.class_count % num_tasks:
        raise ValueError(
            f"{data.class_count} classes cannot be divided evenly into "
            f"{num_tasks} tasks"
        )
    if test_data is None:
        raise_for_fraction(test_fraction, "test_fraction")
    elif (
        test_data.class_count != data.class_count
        or test_data.input_dim != data.input_dim
    ):
        raise ConsistencyError(
            "test_data must have the same class count and input width as "
            "data"
        )

    # Shuffle the classes and cut them into groups
    order = np.random.default_rng(ordering_seed).permutation(data.class_count)
    groups = order.reshape(num_tasks, -1)
    split_rng = np.random.default_rng([ordering_seed, 1])

    tasks = []
    for group in groups:
        train_index = np.flatnonzero(np.isin(data.labels, group))
        if test_data is None:
            permuted = split_rng.permutation(train_index)
            n_test = int(round(len(permuted) * test_fraction))
            test_index = np.sort(permuted[:n_test])
            train_index = np.sort(permuted[n_test:])
            test_source = data
        else:
            test_index = np.flatnonzero(np.isin(test_data.labels, group))
            test_source = test_data
        tasks.append(
            Task(
                X_train=data.inputs[train_index],
                Y_train=one_hot(data.labels[train_index], data.class_count),
                X_test=test_source.inputs[test_index],
                Y_test=one_hot(
                    test_source.labels[test_index], data.class_count
                ),
                class_ids=tuple(int(c) for c in group),
            )
        )

    return TaskSequence(
        tasks=tuple(tasks),
        ordering_seed=ordering_seed,
        class_count=data.class_count,
    )
