"""Datasets: a strict LIBSVM reader/writer, a synthetic generator, normalization.

Examples are stored as rows of a CSR matrix (one sparse vector per example),
which is the column-major layout of the d x n data matrix used by the solvers.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .erm import ErmProblem
from .errors import FormatError
from .sampling import make_rng
from .trace import atomic_write_text

_TOKEN = re.compile(r"\S+")


@dataclass(frozen=True)
class RawDataset:
    X: sp.csr_matrix  # n x d, row i holds example a_i
    labels: np.ndarray

    def __post_init__(self):
        X = sp.csr_matrix(self.X, dtype=float)
        X.sort_indices()
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=float))
        if X.shape[0] < 1:
            raise ValueError("dataset has no examples")
        if self.labels.shape != (X.shape[0],):
            raise ValueError("need exactly one label per example")
        if not (np.all(np.isfinite(X.data)) and np.all(np.isfinite(self.labels))):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def column(self, i: int):
        """Example ``i`` as (indices, values), 0-based."""
        lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
        return self.X.indices[lo:hi].copy(), self.X.data[lo:hi].copy()

    def dense(self) -> np.ndarray:
        """The d x n data matrix, column-major."""
        return np.asfortranarray(self.X.T.toarray())

    def equals(self, other: "RawDataset") -> bool:
        return (self.X.shape == other.X.shape
                and np.array_equal(self.labels, other.labels)
                and (self.X != other.X).nnz == 0)


def _parse_float(tok, lineno, col, what):
    try:
        value = float(tok)
    except ValueError:
        raise FormatError(f"cannot parse {what} {tok!r}", lineno, col) from None
    if not np.isfinite(value):
        raise FormatError(f"non-finite {what} {tok!r}", lineno, col)
    return value


def parse_libsvm(lines, expect_dim: int | None = None) -> RawDataset:
    """Parse LIBSVM text lines ``label idx:val ...`` (1-based, strictly increasing indices)."""
    labels, indptr, indices, values = [], [0], [], []
    max_index = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].rstrip("\r\n")
        tokens = list(_TOKEN.finditer(line))
        if not tokens:
            continue
        labels.append(_parse_float(tokens[0].group(), lineno, tokens[0].start() + 1, "label"))
        prev = 0
        for m in tokens[1:]:
            tok, col = m.group(), m.start() + 1
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise FormatError(f"expected index:value, got {tok!r}", lineno, col)
            try:
                idx = int(idx_s)
            except ValueError:
                raise FormatError(f"cannot parse index {idx_s!r}", lineno, col) from None
            if idx <= 0:
                raise FormatError(f"indices are 1-based, got {idx}", lineno, col)
            if idx == prev:
                raise FormatError(f"duplicate index {idx}", lineno, col)
            if idx < prev:
                raise FormatError(f"index {idx} follows {prev}; indices must increase", lineno, col)
            if expect_dim is not None and idx > expect_dim:
                raise FormatError(f"index {idx} exceeds dimension {expect_dim}", lineno, col)
            indices.append(idx - 1)
            values.append(_parse_float(val_s, lineno, col + len(idx_s) + 1, "value"))
            prev = idx
        max_index = max(max_index, prev)
        indptr.append(len(indices))
    if not labels:
        raise FormatError("no examples")
    d = expect_dim if expect_dim is not None else max_index
    X = sp.csr_matrix((np.array(values, dtype=float), np.array(indices, dtype=np.int64),
                       np.array(indptr, dtype=np.int64)), shape=(len(labels), d))
    return RawDataset(X, np.array(labels))


def load_libsvm(path, expect_dim: int | None = None) -> RawDataset:
    with open(path) as fh:
        return parse_libsvm(fh, expect_dim)


def write_libsvm(data: RawDataset, path):
    """Write in LIBSVM format with round-trip float formatting."""
    def write(fh):
        for i in range(data.n):
            idx, val = data.column(i)
            feats = " ".join(f"{j + 1}:{float(x)!r}" for j, x in zip(idx, val))
            fh.write(f"{float(data.labels[i])!r} {feats}".rstrip() + "\n")

    atomic_write_text(path, write)


def normalize_columns(data: RawDataset) -> RawDataset:
    """Scale every example to unit Euclidean norm; zero examples are rejected."""
    norms = np.sqrt(np.asarray(data.X.multiply(data.X).sum(axis=1)).ravel())
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"cannot normalize zero examples {zero[:10].tolist()}")
    X = sp.diags(1.0 / norms) @ data.X
    return RawDataset(X, data.labels)


def binarize_labels(labels) -> np.ndarray:
    """Map a two-valued label vector onto {-1, +1} (larger value becomes +1)."""
    labels = np.asarray(labels, dtype=float)
    values = np.unique(labels)
    if values.size > 2:
        raise ValueError(f"expected at most two label values, found {values.size}")
    if np.all(np.isin(values, (-1.0, 1.0))):
        return labels.copy()
    return np.where(labels == values[-1], 1.0, -1.0)


def generate_synthetic(d: int, n: int, seed, density: float = 1.0, label_noise: float = 0.0,
                       task: str = "classification") -> RawDataset:
    """Random unit-norm examples with planted labels.

    Each example has ``max(1, round(density * d))`` standard-normal nonzeros at
    uniformly random positions. With a hidden normal ``w``, classification
    labels are ``sign(a_i^T w)`` flipped with probability ``label_noise``;
    regression targets are ``a_i^T w + label_noise * N(0, 1)``.
    """
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    if not 0 <= label_noise:
        raise ValueError("label_noise must be nonnegative")
    if task not in ("classification", "regression"):
        raise ValueError(f"unknown task {task!r}")
    rng = make_rng(seed)
    k = max(1, round(density * d))
    if k == d:
        cols = np.broadcast_to(np.arange(d), (n, d))
    else:
        cols = np.sort(np.argpartition(rng.random((n, d)), k - 1, axis=1)[:, :k], axis=1)
    vals = rng.standard_normal((n, k))
    vals /= np.linalg.norm(vals, axis=1, keepdims=True)
    X = sp.csr_matrix((vals.ravel(), cols.ravel(), np.arange(0, n * k + 1, k)), shape=(n, d))
    w_bar = rng.standard_normal(d)
    margins = X @ w_bar
    if task == "regression":
        labels = margins + label_noise * rng.standard_normal(n)
    else:
        labels = np.where(margins >= 0, 1.0, -1.0)
        flip = rng.random(n) < label_noise
        labels[flip] *= -1
    return RawDataset(X, labels)


def to_problem(data: RawDataset, loss="quadratic", lam: float | None = None) -> ErmProblem:
    """Dense ERM problem; ``lam`` defaults to ``1/n``. Logistic labels are binarized."""
    labels = binarize_labels(data.labels) if loss == "logistic" else data.labels
    return ErmProblem(data.dense(), labels, loss, lam)
