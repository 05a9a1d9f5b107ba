"""
Contains tests for the data module.
"""

import gzip
import re
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from forgetfree.data import (
    Dataset,
    Task,
    TaskSequence,
    load_benchmark,
    load_features,
    load_idx,
    one_hot,
    split_cil,
    write_features,
)
from forgetfree.exceptions import ConsistencyError, DataError, FormatError

# MARK: Fixtures


def write_idx(
    directory,
    images: np.ndarray,
    labels: np.ndarray,
    compress: bool = False,
    prefix: str = "train",
) -> tuple:
    """Writes an IDX image/label pair and returns their paths."""
    count, rows, cols = images.shape
    image_bytes = struct.pack(">IIII", 0x803, count, rows, cols)
    image_bytes += images.astype(np.uint8).tobytes()
    label_bytes = struct.pack(">II", 0x801, len(labels))
    label_bytes += labels.astype(np.uint8).tobytes()
    if compress:
        image_bytes = gzip.compress(image_bytes)
        label_bytes = gzip.compress(label_bytes)
    image_path = directory / f"{prefix}-images"
    label_path = directory / f"{prefix}-labels"
    image_path.write_bytes(image_bytes)
    label_path.write_bytes(label_bytes)
    return image_path, label_path


@pytest.fixture
def pool() -> Dataset:
    """Creates a dataset of 10 classes with 6 samples each."""
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(10), 6)
    inputs = rng.uniform(0, 1, (60, 4)) + labels[:, np.newaxis]
    return Dataset(inputs=inputs, labels=labels, class_count=10)


# MARK: Dataset


def test_dataset_init() -> None:
    """Tests the initialization of the Dataset class."""
    data = Dataset(inputs=[[0, 1], [2, 3]], labels=[1, 0], class_count=2)
    assert data.inputs.dtype == np.float64
    assert data.labels.dtype == np.int64
    assert data.n_samples == len(data) == 2
    assert data.input_dim == 2


def test_dataset_invariants() -> None:
    """Tests that the Dataset class rejects inconsistent data."""
    with pytest.raises(ConsistencyError, match="2 input rows but 1 labels"):
        Dataset(inputs=np.zeros((2, 3)), labels=[0], class_count=2)
    with pytest.raises(ConsistencyError, match=re.escape("[0, 2)")):
        Dataset(inputs=np.zeros((1, 3)), labels=[2], class_count=2)
    with pytest.raises(DataError, match="NaN or infinite"):
        Dataset(inputs=[[np.nan]], labels=[0], class_count=1)
    with pytest.raises(ValueError, match="inputs must be a matrix"):
        Dataset(inputs=np.zeros(3), labels=[0, 0, 0], class_count=1)


# MARK: IDX files


def test_load_idx(tmp_path) -> None:
    """Tests loading an IDX image/label pair."""
    images = np.arange(3 * 2 * 2).reshape(3, 2, 2) * 20
    labels = np.array([3, 0, 9])
    data = load_idx(*write_idx(tmp_path, images, labels))
    assert data.inputs.shape == (3, 4)
    assert data.class_count == 10
    assert np.array_equal(data.labels, labels)

    # Pixels are flattened row-major and scaled by 255
    assert np.allclose(data.inputs[1], np.array([80, 100, 120, 140]) / 255)
    assert data.inputs.max() <= 1.0


def test_load_idx_gzip(tmp_path) -> None:
    """Tests that gzip-compressed IDX files are read transparently."""
    images = np.full((2, 3, 3), 255)
    labels = np.array([1, 2])
    data = load_idx(*write_idx(tmp_path, images, labels, compress=True))
    assert np.array_equal(data.inputs, np.ones((2, 9)))
    assert np.array_equal(data.labels, labels)


def test_load_idx_empty(tmp_path) -> None:
    """Tests loading an IDX pair with no items."""
    images = np.zeros((0, 28, 28))
    data = load_idx(*write_idx(tmp_path, images, np.zeros(0)))
    assert data.inputs.shape == (0, 784)
    assert len(data) == 0


def test_load_idx_errors(tmp_path) -> None:
    """Tests the IDX format and consistency errors."""
    images = np.zeros((2, 2, 2))
    image_path, label_path = write_idx(tmp_path, images, np.array([0, 1]))

    # Bad magic number
    bad = tmp_path / "bad-images"
    bad.write_bytes(struct.pack(">IIII", 0x801, 2, 2, 2) + bytes(8))
    with pytest.raises(FormatError, match="magic number 0x00000801"):
        load_idx(bad, label_path)

    # Truncated pixel data
    short = tmp_path / "short-images"
    short.write_bytes(image_path.read_bytes()[:-1])
    with pytest.raises(FormatError, match="is truncated"):
        load_idx(short, label_path)

    # Count mismatch between the two files
    _, three_labels = write_idx(
        tmp_path, np.zeros((3, 2, 2)), np.zeros(3), prefix="three"
    )
    with pytest.raises(ConsistencyError, match="2 images but"):
        load_idx(image_path, three_labels)

    # Label outside the class range
    _, ten = write_idx(tmp_path, images, np.array([0, 10]), prefix="ten")
    with pytest.raises(ConsistencyError):
        load_idx(image_path, ten)


# MARK: Feature files


def test_load_features(tmp_path) -> None:
    """Tests decoding a feature file by hand."""
    values = np.array([1.5, -2.0, 3.25, 0.0, 7.0, -1.0], dtype="<f4")
    features = tmp_path / "features.bin"
    features.write_bytes(struct.pack("<QQ", 2, 3) + values.tobytes())
    labels = tmp_path / "labels.bin"
    labels.write_bytes(struct.pack("<QQ", 4, 1))

    data = load_features(features, labels)
    assert data.inputs.shape == (2, 3)
    assert np.array_equal(data.inputs, values.reshape(2, 3))
    assert np.array_equal(data.labels, [4, 1])
    assert data.class_count == 5
    assert load_features(features, labels, class_count=8).class_count == 8


def test_load_features_empty(tmp_path) -> None:
    """Tests loading a feature file with no rows."""
    features = tmp_path / "features.bin"
    features.write_bytes(struct.pack("<QQ", 0, 7))
    labels = tmp_path / "labels.bin"
    labels.write_bytes(b"")
    data = load_features(features, labels)
    assert data.inputs.shape == (0, 7)


def test_load_features_errors(tmp_path) -> None:
    """Tests the feature file format and data errors."""
    labels = tmp_path / "labels.bin"
    labels.write_bytes(struct.pack("<QQ", 0, 1))

    # Fewer floats than the header announces
    features = tmp_path / "short.bin"
    features.write_bytes(struct.pack("<QQ", 2, 3) + bytes(4 * 5))
    with pytest.raises(FormatError, match="is truncated"):
        load_features(features, labels)

    # Header itself is cut short
    features.write_bytes(bytes(10))
    with pytest.raises(FormatError, match="is truncated"):
        load_features(features, labels)

    # Non-finite values
    values = np.array([0, np.inf, 0, 0, 0, 0], dtype="<f4")
    features.write_bytes(struct.pack("<QQ", 2, 3) + values.tobytes())
    with pytest.raises(DataError, match="non-finite"):
        load_features(features, labels)

    # Wrong number of labels
    features.write_bytes(struct.pack("<QQ", 2, 3) + bytes(24))
    labels.write_bytes(struct.pack("<Q", 0))
    with pytest.raises(ConsistencyError, match="holds 2 rows"):
        load_features(features, labels)


def test_load_features_gzip(tmp_path, pool: Dataset) -> None:
    """Tests that gzip-compressed feature files are read transparently."""
    features, labels = tmp_path / "f.bin", tmp_path / "l.bin"
    write_features(features, labels, pool)
    for path in [features, labels]:
        path.write_bytes(gzip.compress(path.read_bytes()))
    loaded = load_features(features, labels)
    assert np.array_equal(loaded.labels, pool.labels)
    assert loaded.inputs.shape == pool.inputs.shape


def test_load_truncated_gzip(tmp_path) -> None:
    """Tests that a cut-off gzip stream is a format error naming the file."""
    images = np.zeros((2, 2, 2))
    image_path, label_path = write_idx(
        tmp_path, images, np.array([0, 1]), compress=True
    )
    image_path.write_bytes(image_path.read_bytes()[:-12])
    with pytest.raises(FormatError, match=re.escape(str(image_path))):
        load_idx(image_path, label_path)

    # Corrupt compressed data behind a valid signature
    plain, _ = write_idx(tmp_path, images, np.array([0, 1]), prefix="ok")
    label_path.write_bytes(gzip.compress(b"labels")[:10] + bytes(20))
    with pytest.raises(FormatError, match="not a readable gzip file"):
        load_idx(plain, label_path)


def test_load_features_sparse_labels(tmp_path) -> None:
    """Tests that an absurd largest label is not taken as the class count."""
    features = tmp_path / "features.bin"
    features.write_bytes(struct.pack("<QQ", 2, 1) + bytes(8))
    labels = tmp_path / "labels.bin"
    labels.write_bytes(struct.pack("<QQ", 0, 10**12))
    message = "labels up to 1000000000000 but only 2 distinct classes"
    with pytest.raises(DataError, match=re.escape(message)):
        load_features(features, labels)

    # A modest gap is still inferred
    labels.write_bytes(struct.pack("<QQ", 0, 500))
    assert load_features(features, labels).class_count == 501


def test_write_features(tmp_path, pool: Dataset) -> None:
    """Tests that written feature files load back at single precision."""
    features, labels = tmp_path / "f.bin", tmp_path / "l.bin"
    write_features(features, labels, pool)
    loaded = load_features(features, labels)
    assert np.array_equal(loaded.labels, pool.labels)
    assert np.allclose(loaded.inputs, pool.inputs, atol=1e-6)
    assert features.stat().st_size == 16 + 4 * pool.inputs.size


def test_load_benchmark(tmp_path) -> None:
    """Tests resolving the standard file names of a benchmark directory."""
    images = np.zeros((2, 2, 2))
    for prefix, names in [
        ("train", ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")),
        ("test", ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")),
    ]:
        paths = write_idx(tmp_path, images, np.array([0, 1]), prefix=prefix)
        paths[0].rename(tmp_path / names[0])
        paths[1].rename(tmp_path / f"{names[1]}.gz")
    train, test = load_benchmark("mnist", tmp_path)
    assert len(train) == len(test) == 2

    # Feature benchmarks agree on one class count
    rng = np.random.default_rng(1)
    write_features(
        tmp_path / "train_features.bin",
        tmp_path / "train_labels.bin",
        Dataset(rng.normal(size=(3, 2)), [0, 1, 4], 5),
    )
    write_features(
        tmp_path / "test_features.bin",
        tmp_path / "test_labels.bin",
        Dataset(rng.normal(size=(2, 2)), [0, 1], 2),
    )
    train, test = load_benchmark("features", tmp_path)
    assert train.class_count == test.class_count == 5

    # Unknown kinds and missing files
    with pytest.raises(ValueError, match="Unknown benchmark kind 'cifar'"):
        load_benchmark("cifar", tmp_path)
    with pytest.raises(FileNotFoundError):
        load_benchmark("fashion-mnist", tmp_path / "missing")


# MARK: Splitting


def test_split_cil(pool: Dataset) -> None:
    """Tests splitting a dataset into class-incremental tasks."""
    sequence = split_cil(pool, num_tasks=5, ordering_seed=3)
    assert len(sequence) == 5
    assert sequence.class_count == 10
    assert sorted(sequence.class_order) == list(range(10))
    for task in sequence:
        assert len(task.class_ids) == 2
        assert task.Y_train.shape[1] == 10
        assert set(task.labels_train) == set(task.class_ids)
        assert task.n_samples + task.X_test.shape[0] == 12


def test_split_cil_layouts(pool: Dataset) -> None:
    """Tests single-task and indivisible layouts."""
    sequence = split_cil(pool, num_tasks=1, ordering_seed=0)
    assert len(sequence) == 1
    assert sorted(sequence[0].class_ids) == list(range(10))

    message = "10 classes cannot be divided evenly into 3 tasks"
    with pytest.raises(ValueError, match=re.escape(message)):
        split_cil(pool, num_tasks=3, ordering_seed=0)
    with pytest.raises(ValueError, match="test_fraction"):
        split_cil(pool, num_tasks=5, ordering_seed=0, test_fraction=1.0)


def test_split_cil_determinism(pool: Dataset) -> None:
    """Tests that a fixed seed reproduces the split bit for bit."""
    first = split_cil(pool, num_tasks=5, ordering_seed=11)
    second = split_cil(pool, num_tasks=5, ordering_seed=11)
    assert first.class_order == second.class_order
    for a, b in zip(first, second):
        assert np.array_equal(a.X_train, b.X_train)
        assert np.array_equal(a.X_test, b.X_test)


def test_split_cil_test_data(pool: Dataset) -> None:
    """Tests that a separate test dataset supplies the test splits."""
    test = Dataset(pool.inputs[::2], pool.labels[::2], 10)
    sequence = split_cil(pool, num_tasks=2, ordering_seed=0, test_data=test)
    assert sum(task.n_samples for task in sequence) == 60
    assert sum(task.X_test.shape[0] for task in sequence) == 30

    other = Dataset(pool.inputs, pool.labels % 5, 5)
    with pytest.raises(ConsistencyError):
        split_cil(pool, num_tasks=2, ordering_seed=0, test_data=other)


def test_cumulative_train(pool: Dataset) -> None:
    """Tests stacking the training data of the first tasks."""
    sequence = split_cil(pool, num_tasks=5, ordering_seed=2)
    X, Y = sequence.cumulative_train(2)
    expected = sum(task.n_samples for task in sequence.tasks[:3])
    assert X.shape == (expected, 4)
    assert Y.shape == (expected, 10)


def test_task_sequence_partition() -> None:
    """Tests that task sequences must partition the class set."""
    task = Task(
        X_train=np.zeros((1, 2)),
        Y_train=one_hot(np.array([0]), 2),
        X_test=np.zeros((0, 2)),
        Y_test=np.zeros((0, 2)),
        class_ids=(0,),
    )
    with pytest.raises(ConsistencyError, match="repeats classes"):
        TaskSequence(tasks=(task, task), ordering_seed=0, class_count=2)
    with pytest.raises(ConsistencyError, match="expected all of"):
        TaskSequence(tasks=(task,), ordering_seed=0, class_count=2)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 5, 10]))
def test_split_cil_properties(seed: int, num_tasks: int) -> None:
    """Tests the partition and one-hot properties for any seed."""
    labels = np.repeat(np.arange(10), 3)
    data = Dataset(np.zeros((30, 1)), labels, 10)
    sequence = split_cil(data, num_tasks, ordering_seed=seed)
    seen: set[int] = set()
    for task in sequence:
        assert not seen & set(task.class_ids)
        seen.update(task.class_ids)
        for Y in [task.Y_train, task.Y_test]:
            assert np.all((Y == 0) | (Y == 1))
            assert np.all(Y.sum(axis=1) == 1)
    assert seen == set(range(10))
