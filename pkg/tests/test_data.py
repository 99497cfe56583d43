import gzip

import numpy as np
import pytest

from apes.data import (BadMagicError, CountMismatchError, Dataset, LabelRangeError, TruncatedIdxError,
                       load_idx, partition_even, synth_classification, write_idx)
from apes.errors import ParameterError
from apes.fl_sim import evaluate, local_gradient, n_params


@pytest.fixture
def idx_pair(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(12, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=12, dtype=np.uint8)
    write_idx(tmp_path / "img.idx", images)
    write_idx(tmp_path / "lbl.idx", labels)
    return tmp_path, images, labels


def test_idx_round_trip(idx_pair):
    path, images, labels = idx_pair
    ds = load_idx(path / "img.idx", path / "lbl.idx")
    assert ds.features.shape == (12, 784)
    assert np.allclose(ds.features, images.reshape(12, -1) / 255.0)
    assert np.array_equal(ds.labels, labels)
    assert 0 <= ds.features.min() and ds.features.max() <= 1


def test_idx_gzip(tmp_path):
    images = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
    write_idx(tmp_path / "i.gz", images, compress=True)
    write_idx(tmp_path / "l.gz", np.array([1, 2], dtype=np.uint8), compress=True)
    ds = load_idx(tmp_path / "i.gz", tmp_path / "l.gz")
    assert ds.features.shape == (2, 12)


def test_idx_bad_magic(idx_pair):
    path, *_ = idx_pair
    with pytest.raises(BadMagicError):
        load_idx(path / "lbl.idx", path / "lbl.idx")


def test_idx_truncated(idx_pair):
    path, *_ = idx_pair
    raw = (path / "img.idx").read_bytes()
    (path / "short.idx").write_bytes(raw[:-100])
    with pytest.raises(TruncatedIdxError, match=str(len(raw) - 100)) as info:
        load_idx(path / "short.idx", path / "lbl.idx")
    assert str(len(raw)) in str(info.value)


def test_idx_count_mismatch(idx_pair, tmp_path):
    path, *_ = idx_pair
    write_idx(tmp_path / "few.idx", np.zeros(5, dtype=np.uint8))
    with pytest.raises(CountMismatchError):
        load_idx(path / "img.idx", tmp_path / "few.idx")


def test_idx_label_out_of_range(idx_pair, tmp_path):
    path, *_ = idx_pair
    write_idx(tmp_path / "bad.idx", np.full(12, 11, dtype=np.uint8))
    with pytest.raises(LabelRangeError):
        load_idx(path / "img.idx", tmp_path / "bad.idx")


def test_synth_single_class():
    ds = synth_classification(50, 4, 1, seed=0)
    assert np.all(ds.labels == 0)


def test_synth_deterministic():
    a = synth_classification(100, 5, 3, seed=11)
    b = synth_classification(100, 5, 3, seed=11)
    assert a.features.tobytes() == b.features.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


def test_synth_zero_noise_separable():
    ds = synth_classification(600, 10, 4, seed=2, noise=0.0)
    w = np.zeros(n_params(10, 4))
    for _ in range(2000):
        w -= 5.0 * local_gradient(w, ds)
    assert evaluate(w, ds) == 1.0


def test_dataset_validation():
    with pytest.raises(ParameterError):
        Dataset(np.zeros((3, 2)), np.array([0, 1, 5]), 3)


def test_partition_even():
    ds = synth_classification(100, 2, 2, seed=0)
    shards = partition_even(ds, 10, seed=1)
    assert [len(s) for s in shards] == [10] * 10
    ds = synth_classification(101, 2, 2, seed=0)
    sizes = sorted(len(s) for s in partition_even(ds, 10, seed=1))
    assert sizes == [10] * 9 + [11]


def test_partition_covers_rows_once():
    ds = synth_classification(57, 3, 2, seed=0)
    shards = partition_even(ds, 7, seed=3)
    stacked = np.vstack([s.features for s in shards])
    assert sorted(map(tuple, stacked)) == sorted(map(tuple, ds.features))
    again = partition_even(ds, 7, seed=3)
    assert all(np.array_equal(a.features, b.features) for a, b in zip(shards, again))


def test_partition_too_many_users():
    with pytest.raises(ParameterError):
        partition_even(synth_classification(5, 2, 2, seed=0), 6)
