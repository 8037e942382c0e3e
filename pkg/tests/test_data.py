import numpy as np
import pytest

from drlr.data import (EmptyDatasetError, LibsvmFormatError, Rng, add_label_noise,
                       generate_synthetic, parse_libsvm, read_libsvm, split,
                       to_libsvm, write_libsvm)
from drlr.sample_datasets import load_sample_synthetic, sample_table


EXAMPLE = """+1 1:0.5 3:-1.25
-1 2:2

+1 1:1e-3 2:4 3:7
"""


def test_parse_example():
    data = parse_libsvm(EXAMPLE)
    assert data.is_sparse
    assert data.features.shape == (3, 3)
    assert np.array_equal(data.labels, [1.0, -1.0, 1.0])
    assert np.allclose(data.features.toarray(),
                       [[0.5, 0.0, -1.25], [0.0, 2.0, 0.0], [1e-3, 4.0, 7.0]])


def test_parse_bytes_and_width_override():
    data = parse_libsvm(EXAMPLE.encode(), n_features=5)
    assert data.n_features == 5
    with pytest.raises(ValueError):
        parse_libsvm(EXAMPLE, n_features=2)


def test_empty_input():
    with pytest.raises(EmptyDatasetError):
        parse_libsvm("\n  \n")


@pytest.mark.parametrize("text, line, column", [
    ("+1 1:1 1:2\n", 1, 8),
    ("+1 2:1\n-1 3:1 2:5\n", 2, 8),
    ("0 1:1\n", 1, 1),
    ("+1 0:1\n", 1, 4),
    ("+1 1:abc\n", 1, 4),
    ("+1 1=3\n", 1, 4),
])
def test_format_errors_name_the_position(text, line, column):
    with pytest.raises(LibsvmFormatError) as err:
        parse_libsvm(text)
    assert err.value.line == line
    assert err.value.column == column
    assert f"line {line}" in str(err.value)


def test_round_trip_preserves_values(tmp_path):
    data, _ = load_sample_synthetic("tiny")
    fname = tmp_path / "tiny.svm"
    write_libsvm(data, fname)
    back = read_libsvm(fname, n_features=data.n_features)
    assert np.array_equal(back.features.toarray(), data.features)
    assert np.array_equal(back.labels, data.labels)
    assert to_libsvm(back) == to_libsvm(data)


def test_rng_is_deterministic():
    a, b = Rng(42), Rng(42)
    assert np.array_equal(a.raw(10), b.raw(10))
    assert np.array_equal(a.normal(7), b.normal(7))
    assert not np.array_equal(Rng(1).uniform(5), Rng(2).uniform(5))


def test_rng_ranges():
    rng = Rng(0)
    u = rng.uniform(10000)
    assert u.min() >= 0.0 and u.max() < 1.0
    z = rng.normal(20001)
    assert z.size == 20001
    assert abs(z.mean()) < 0.05 and abs(z.std() - 1.0) < 0.05
    assert sorted(rng.permutation(50)) == list(range(50))
    assert rng.spawn(3).seed == 3
    with pytest.raises(ValueError):
        Rng(-1)


def test_synthetic_generator():
    data, beta_star = generate_synthetic(100, 3, Rng(42))
    again, beta_again = generate_synthetic(100, 3, Rng(42))
    assert np.array_equal(data.features, again.features)
    assert np.array_equal(beta_star, beta_again)
    assert np.linalg.norm(beta_star) == pytest.approx(1.0)
    assert set(np.unique(data.labels)) <= {-1.0, 1.0}
    assert data.features.shape == (100, 3)
    with pytest.raises(ValueError):
        generate_synthetic(0, 3, Rng(0))


def test_synthetic_labels_follow_the_model():
    data, beta_star = generate_synthetic(5000, 3, Rng(9))
    # labels agree with sign(beta*^T x) well above chance
    agree = np.mean(np.sign(data.features @ beta_star) == data.labels)
    assert agree > 0.6
    assert 0.4 < np.mean(data.labels > 0) < 0.6


def test_split_sizes_and_partition():
    data, _ = generate_synthetic(10, 2, Rng(1))
    train, test = split(data, 0.6, Rng(1))
    assert (train.n_samples, test.n_samples) == (6, 4)
    rows = {tuple(r) for r in np.vstack([train.features, test.features])}
    assert rows == {tuple(r) for r in data.features}

    again, _ = split(data, 0.6, Rng(1))
    assert np.array_equal(again.features, train.features)
    other, _ = split(data, 0.6, Rng(2))
    assert not np.array_equal(other.features, train.features)

    assert split(data, 0.7, Rng(0))[0].n_samples == 7


def test_split_rejects_empty_side():
    data, _ = generate_synthetic(2, 2, Rng(1))
    with pytest.raises(EmptyDatasetError):
        split(data, 0.9, Rng(0))
    with pytest.raises(ValueError):
        split(data, 1.0, Rng(0))


def test_label_noise():
    data, _ = generate_synthetic(50, 2, Rng(3))
    noisy = add_label_noise(data, 0.2, Rng(3))
    assert np.sum(noisy.labels != data.labels) == 10
    assert np.array_equal(add_label_noise(data, 0.0, Rng(3)).labels, data.labels)
    with pytest.raises(ValueError):
        add_label_noise(data, 1.5, Rng(3))


def test_sample_table():
    df = sample_table()
    assert {"tiny", "small", "rate", "medium", "large"} <= set(df.index)
    data, _ = load_sample_synthetic("tiny")
    assert (data.n_samples, data.n_features) == (20, 3)
    with pytest.raises(KeyError):
        load_sample_synthetic("huge")
