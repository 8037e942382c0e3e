"""Data input and generation: LIBSVM text files, the synthetic logistic
model, seeded train/test splits and label noise."""
import io
import logging
import math

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .model import Dataset


logger = logging.getLogger(__name__)

# guards ceil(fraction * N) against products like 0.7 * 10 = 7.000000000000001
SPLIT_ROUNDING = 1e-9


class LibsvmFormatError(ValueError):
    def __init__(self, message, line, column=None):
        self.line = line
        self.column = column
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")


class EmptyDatasetError(ValueError):
    pass


class Rng:
    """Seeded stream built on the raw 64-bit output of PCG64.

    Uniforms take the top 53 bits of each word, Gaussians come from
    Box-Muller pairs, so a seed fixes every draw independently of
    numpy's distribution code."""

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a non-negative 64-bit integer, got {seed}")
        self.seed = seed
        self._bitgen = np.random.PCG64(seed)

    def raw(self, size):
        return np.asarray(self._bitgen.random_raw(size), dtype=np.uint64)

    def uniform(self, size):
        """Uniforms on [0, 1)"""
        return (self.raw(size) >> np.uint64(11)).astype(float) * 2.0**-53

    def normal(self, size):
        pairs = (size + 1) // 2
        u1 = 1.0 - self.uniform(pairs)
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return z[:size]

    def permutation(self, n):
        return np.argsort(self.uniform(n), kind="stable")

    def spawn(self, offset):
        """Independent stream for trial `offset`, seeded with seed + offset"""
        return Rng((self.seed + offset) % 2**64)

    def __repr__(self):
        return f"Rng(seed={self.seed})"


# =====
# LIBSVM format
# =====
def _parse_label(token, lineno):
    try:
        label = float(token)
    except ValueError:
        raise LibsvmFormatError(f"malformed label '{token}'", lineno, 1) from None
    if label not in (1.0, -1.0):
        raise LibsvmFormatError(f"label must be +1 or -1, got '{token}'", lineno, 1)
    return label


def parse_libsvm(text, n_features=None):
    """Parse "<label> <index>:<value> ..." lines, indices 1-based and strictly
    ascending. Returns a CSR-backed Dataset whose width is the largest index,
    or `n_features` when given."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    labels, rows, cols, vals = [], [], [], []
    max_index = 0
    for lineno, line in enumerate(io.StringIO(text), start=1):
        if not line.strip():
            continue
        # column positions of tokens, 1-based
        tokens = [(m_start + 1, tok) for m_start, tok in _tokenize(line)]
        labels.append(_parse_label(tokens[0][1], lineno))
        row = len(labels) - 1
        last = 0
        for col, tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmFormatError(f"expected index:value, got '{tok}'", lineno, col)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmFormatError(f"malformed feature '{tok}'", lineno, col) from None
            if idx < 1:
                raise LibsvmFormatError(f"feature index must be >= 1, got {idx}", lineno, col)
            if idx == last:
                raise LibsvmFormatError(f"duplicate feature index {idx}", lineno, col)
            if idx < last:
                raise LibsvmFormatError(
                    f"feature indices not ascending ({idx} after {last})", lineno, col)
            last = idx
            rows.append(row)
            cols.append(idx - 1)
            vals.append(val)
        max_index = max(max_index, last)

    if not labels:
        raise EmptyDatasetError("no samples in LIBSVM input")
    if n_features is None:
        n_features = max_index
    elif n_features < max_index:
        raise ValueError(f"n_features={n_features} but the data uses index {max_index}")
    X = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), n_features), dtype=float)
    return Dataset(X, labels)


def _tokenize(line):
    pos = 0
    for tok in line.split():
        start = line.index(tok, pos)
        pos = start + len(tok)
        yield start, tok


def read_libsvm(fname, n_features=None):
    with open(fname, "rb") as f:
        data = parse_libsvm(f.read(), n_features)
    n_pos = int(np.sum(data.labels > 0))
    logger.info("Read %s: %d samples (%d positive), %d features",
                fname, data.n_samples, n_pos, data.n_features)
    return data


def to_libsvm(data):
    """Serialize to LIBSVM text; values are written with repr so they
    reparse to the same doubles"""
    X = sp.csr_matrix(data.features)
    X.eliminate_zeros()
    X.sort_indices()
    lines = []
    for i in range(data.n_samples):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        feats = " ".join(f"{j + 1}:{float(v)!r}"
                         for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
        label = "+1" if data.labels[i] > 0 else "-1"
        lines.append(f"{label} {feats}".rstrip())
    return "\n".join(lines) + "\n"


def write_libsvm(data, fname):
    with open(fname, "w") as f:
        f.write(to_libsvm(data))


# =====
# Synthetic data and splits
# =====
def generate_synthetic(N, n, rng):
    """Features i.i.d. N(0, 1), beta* a normalised Gaussian vector and labels
    y_i = +1 if z_i < sigmoid(beta*^T x_i) else -1, z_i uniform on [0, 1)"""
    if N < 1 or n < 1:
        raise ValueError(f"need N >= 1 and n >= 1, got N={N}, n={n}")
    if not isinstance(rng, Rng):
        rng = Rng(rng)
    beta = rng.normal(n)
    norm = np.linalg.norm(beta)
    if norm == 0:
        raise ValueError("degenerate ground-truth draw")
    beta_star = beta / norm
    X = rng.normal(N * n).reshape(N, n)
    z = rng.uniform(N)
    labels = np.where(z < expit(X @ beta_star), 1.0, -1.0)
    return Dataset(X, labels), beta_star


def split(data, train_fraction, rng):
    """Seeded random split, the first ceil(fraction * N) permuted rows train"""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if not isinstance(rng, Rng):
        rng = Rng(rng)
    N = data.n_samples
    n_train = math.ceil(train_fraction * N - SPLIT_ROUNDING)
    if n_train < 1 or n_train >= N:
        raise EmptyDatasetError(
            f"splitting {N} samples at {train_fraction} leaves one side empty")
    perm = rng.permutation(N)
    return data.subset(perm[:n_train]), data.subset(perm[n_train:])


def add_label_noise(data, fraction, rng):
    """Flip the labels of round(fraction * N) randomly chosen samples"""
    if not 0 <= fraction <= 1:
        raise ValueError(f"noise fraction must lie in [0, 1], got {fraction}")
    if not isinstance(rng, Rng):
        rng = Rng(rng)
    n_flip = int(round(fraction * data.n_samples))
    labels = np.array(data.labels)
    labels[rng.permutation(data.n_samples)[:n_flip]] *= -1.0
    return Dataset(data.features, labels)
