"""Random subset samplings: drawing, inclusion probabilities, expected operators, ESO.

A sampling is a distribution over nonempty subsets of ``range(n)``. Two kinds
are supported: the tau-nice sampling (uniform over all subsets of size tau;
the serial uniform sampling is tau = 1) and explicit lists of atoms
``(subset, probability)``.

Random streams are ``numpy.random.Generator`` objects; use :func:`make_rng`
for the default counter-based (Philox) stream. Drawing ``k`` subsets with
:func:`draw_many` consumes exactly the same stream as ``k`` calls to
:func:`draw`, so runs that share a seed share their draws.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import _kernels
from .errors import CapacityError, ImproperSamplingError, InvariantViolation
from .linalg import (
    PIVOT_RTOL,
    as_subset,
    block_cholesky,
    as_symmetric,
    is_psd,
    largest_eigenvalue,
    smallest_eigenvalue,
)

ENUMERATION_CAP = 10**6
PROB_ATOL = 1e-12


def make_rng(seed) -> np.random.Generator:
    """Counter-based, splittable random stream seeded by ``seed``."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class SamplingSpec:
    n: int
    kind: str
    tau: int | None = None
    atoms: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.kind == "tau_nice":
            if self.tau is None or not 1 <= self.tau <= self.n:
                raise ValueError(f"tau must lie in [1, {self.n}], got {self.tau}")
        elif self.kind == "explicit":
            if not self.atoms:
                raise ValueError("explicit sampling needs at least one atom")
            total = 0.0
            for subset, prob in self.atoms:
                if len(subset) == 0:
                    raise ImproperSamplingError("atoms must be nonempty (nonvacuous sampling)")
                if prob < 0:
                    raise ValueError("atom probabilities must be nonnegative")
                total += prob
            if abs(total - 1.0) > PROB_ATOL:
                raise ValueError(f"atom probabilities sum to {total!r}, not 1")
            covered = set()
            for subset, prob in self.atoms:
                if prob > 0:
                    covered.update(subset)
            if len(covered) < self.n:
                missing = sorted(set(range(self.n)) - covered)
                raise ImproperSamplingError(f"coordinates {missing} are never sampled")
        else:
            raise ValueError(f"unknown sampling kind {self.kind!r}")

    @classmethod
    def tau_nice(cls, n: int, tau: int) -> "SamplingSpec":
        return cls(n=int(n), kind="tau_nice", tau=int(tau))

    @classmethod
    def serial_uniform(cls, n: int) -> "SamplingSpec":
        return cls.tau_nice(n, 1)

    @classmethod
    def explicit(cls, n: int, atoms) -> "SamplingSpec":
        clean = []
        for subset, prob in atoms:
            clean.append((tuple(int(i) for i in as_subset(subset, n)), float(prob)))
        return cls(n=int(n), kind="explicit", atoms=tuple(clean))

    @property
    def max_size(self) -> int:
        """A bound tau with |S| <= tau almost surely."""
        if self.kind == "tau_nice":
            return self.tau
        return max(len(s) for s, p in self.atoms if p > 0)

    @property
    def is_uniform(self) -> bool:
        if self.kind == "tau_nice":
            return True
        p = probability_vector(self).p
        return bool(np.ptp(p) <= PROB_ATOL)

    def support_size(self) -> int:
        if self.kind == "tau_nice":
            return math.comb(self.n, self.tau)
        return len(self.atoms)

    def to_json(self) -> dict:
        if self.kind == "tau_nice":
            return {"kind": "tau_nice", "n": self.n, "tau": self.tau}
        return {
            "kind": "explicit",
            "n": self.n,
            "atoms": [{"set": list(s), "prob": p} for s, p in self.atoms],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SamplingSpec":
        kind = obj.get("kind")
        if kind == "tau_nice":
            return cls.tau_nice(obj["n"], obj["tau"])
        if kind == "serial_uniform":
            return cls.serial_uniform(obj["n"])
        if kind == "explicit":
            return cls.explicit(obj["n"], [(a["set"], a["prob"]) for a in obj["atoms"]])
        raise ValueError(f"unknown sampling kind {kind!r}")


@dataclass(frozen=True)
class SamplingStats:
    p: np.ndarray
    tau_expected: float


class SubsetBatch(NamedTuple):
    """``k`` subsets in CSR layout: subset ``r`` is ``indices[offsets[r]:offsets[r+1]]``."""

    indices: np.ndarray
    offsets: np.ndarray

    def __len__(self):
        return len(self.offsets) - 1

    def subset(self, r: int) -> np.ndarray:
        return self.indices[self.offsets[r]:self.offsets[r + 1]]

    def __iter__(self):
        for r in range(len(self)):
            yield self.subset(r)


def draw_many(spec: SamplingSpec, rng: np.random.Generator, k: int) -> SubsetBatch:
    """Draw ``k`` i.i.d. subsets."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if spec.kind == "tau_nice":
        U = rng.random((k, spec.tau))
        rows = _kernels.floyd_rows(U, spec.n)
        offsets = np.arange(k + 1, dtype=np.int64) * spec.tau
        return SubsetBatch(rows.ravel(), offsets)
    probs = np.array([p for _, p in spec.atoms])
    cum = np.cumsum(probs)
    u = rng.random(k) * cum[-1]
    which = np.minimum(np.searchsorted(cum, u, side="right"), len(probs) - 1)
    sizes = np.array([len(spec.atoms[a][0]) for a in which], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    if k == 0:
        return SubsetBatch(np.empty(0, dtype=np.int64), offsets)
    indices = np.concatenate([np.asarray(spec.atoms[a][0], dtype=np.int64) for a in which])
    return SubsetBatch(indices, offsets)


def draw(spec: SamplingSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one subset (sorted int64 array)."""
    return draw_many(spec, rng, 1).subset(0).copy()


def probability_vector(spec: SamplingSpec) -> SamplingStats:
    """Exact inclusion probabilities ``p_i = Prob(i in S)`` and ``E|S|``."""
    n = spec.n
    if spec.kind == "tau_nice":
        p = np.full(n, spec.tau / n)
        return SamplingStats(p=p, tau_expected=float(spec.tau))
    p = np.zeros(n)
    size = 0.0
    for subset, prob in spec.atoms:
        p[list(subset)] += prob
        size += prob * len(subset)
    if np.any(p <= 0):
        raise ImproperSamplingError(f"coordinates {np.flatnonzero(p <= 0).tolist()} are never sampled")
    return SamplingStats(p=p, tau_expected=size)


def enumerate_support(spec: SamplingSpec, cap: int = ENUMERATION_CAP) -> Iterator[tuple[np.ndarray, float]]:
    """Yield every ``(subset, probability)`` pair of the sampling."""
    size = spec.support_size()
    if size > cap:
        raise CapacityError(
            f"support has {size} subsets (cap {cap}); use mode='monte_carlo'"
        )
    if spec.kind == "tau_nice":
        prob = 1.0 / size
        for combo in itertools.combinations(range(spec.n), spec.tau):
            yield np.array(combo, dtype=np.int64), prob
    else:
        for subset, prob in spec.atoms:
            if prob > 0:
                yield np.array(subset, dtype=np.int64), prob


def expected_submatrix(spec: SamplingSpec, M) -> np.ndarray:
    """``E[M_S]``. Closed form for tau-nice, atom-weighted sum otherwise."""
    M = as_symmetric(M)
    if M.shape[0] != spec.n:
        raise ValueError("dimension mismatch between sampling and matrix")
    n = spec.n
    if spec.kind == "tau_nice":
        tau = spec.tau
        D = np.diag(np.diag(M))
        off = tau * (tau - 1) / (n * (n - 1)) if n > 1 else 0.0
        return (tau / n) * D + off * (M - D)
    out = np.zeros_like(M)
    for subset, prob in enumerate_support(spec):
        out[np.ix_(subset, subset)] += prob * M[np.ix_(subset, subset)]
    return out


def _scatter_block_inverses(M, rows, weights, out):
    """Add ``weights[r] * (M_{S_r})^+`` to ``out`` for equal-size subsets ``rows``."""
    blocks = M[rows[:, :, None], rows[:, None, :]]
    dmax = np.max(np.diagonal(blocks, axis1=1, axis2=2), axis=1)
    try:
        L = np.linalg.cholesky(blocks)
        bad = np.min(np.diagonal(L, axis1=1, axis2=2), axis=1) ** 2 < PIVOT_RTOL * dmax
    except np.linalg.LinAlgError:
        bad = np.ones(len(rows), dtype=bool)
    if np.any(bad):
        for S in rows[bad]:
            block_cholesky(M, S)
    eye = np.broadcast_to(np.eye(rows.shape[1]), blocks.shape)
    Linv = np.linalg.solve(L, eye)
    inv = np.einsum("kji,kjl->kil", Linv, Linv)
    np.add.at(out, (rows[:, :, None], rows[:, None, :]), weights[:, None, None] * inv)


def expected_pseudoinverse(
    spec: SamplingSpec,
    M,
    mode: str = "exact",
    samples: int = 100_000,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """``E[(M_S)^+]`` by exact enumeration or as a Monte Carlo mean of ``samples`` draws."""
    M = as_symmetric(M)
    n = spec.n
    out = np.zeros((n, n))
    if mode == "exact":
        subsets = list(enumerate_support(spec))
        by_size: dict[int, list] = {}
        for S, prob in subsets:
            by_size.setdefault(S.size, []).append((S, prob))
        for group in by_size.values():
            rows = np.array([S for S, _ in group])
            weights = np.array([p for _, p in group])
            _scatter_block_inverses(M, rows, weights, out)
        return 0.5 * (out + out.T)
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("monte_carlo mode needs an rng")
    remaining = samples
    while remaining > 0:
        k = min(remaining, 100_000)
        batch = draw_many(spec, rng, k)
        sizes = np.diff(batch.offsets)
        for size in np.unique(sizes):
            sel = np.flatnonzero(sizes == size)
            rows = np.stack([batch.subset(r) for r in sel])
            uniq, counts = np.unique(rows, axis=0, return_counts=True)
            _scatter_block_inverses(M, uniq, counts / samples, out)
        remaining -= k
    return 0.5 * (out + out.T)


def verify_eso(spec: SamplingSpec, M, v, tol: float = 1e-10) -> bool:
    """True iff ``D(p) D(v) - E[M_S]`` is PSD within ``tol``."""
    v = np.asarray(v, dtype=float)
    p = probability_vector(spec).p
    diff = np.diag(p * v) - expected_submatrix(spec, M)
    return is_psd(0.5 * (diff + diff.T), tol)


def normalized_spectral_bound(M) -> float:
    """``lambda'(M) = max{h^T M h : h^T D(M) h <= 1}``."""
    d = np.sqrt(np.diag(M))
    return largest_eigenvalue(M / np.outer(d, d))


def eso_vector(spec: SamplingSpec, M, strategy: str = "certified_scaling", rtol: float = 1e-6,
               tol: float = 1e-10) -> np.ndarray:
    """A vector ``v`` with ``E[M_S] <= D(p) D(v)``.

    ``conservative``: ``v_i = min(tau, lambda'(M)) M_ii`` with ``tau`` a bound on |S|.
    ``certified_scaling``: ``v_i = beta M_ii`` with the smallest ``beta`` in
    ``[1, tau]`` (to relative accuracy ``rtol``) that passes :func:`verify_eso`.
    """
    M = as_symmetric(M)
    diag = np.diag(M)
    if np.any(diag <= 0):
        raise ValueError("ESO needs a strictly positive diagonal")
    tau = spec.max_size
    if strategy == "conservative":
        v = min(float(tau), normalized_spectral_bound(M)) * diag
    elif strategy == "certified_scaling":
        v = certified_beta(spec, M, rtol=rtol, tol=tol) * diag
    else:
        raise ValueError(f"unknown ESO strategy {strategy!r}")
    if not verify_eso(spec, M, v, tol=tol):
        raise InvariantViolation(f"{strategy} ESO vector failed verification")
    return v


def certified_beta(spec: SamplingSpec, M, rtol: float = 1e-6, tol: float = 1e-10) -> float:
    """Bisection for the smallest ``beta`` with ``E[M_S] <= beta D(p) D(M)``."""
    M = as_symmetric(M)
    p = probability_vector(spec).p
    E = expected_submatrix(spec, M)
    base = np.diag(p * np.diag(M))

    def slack(beta):
        return smallest_eigenvalue(beta * base - E)

    lo, hi = 1.0, float(spec.max_size)
    if slack(lo) >= -tol:
        return lo
    if slack(hi) < -tol:
        raise InvariantViolation("beta = tau does not certify the ESO inequality")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if slack(mid) >= -tol:
            hi = mid
        else:
            lo = mid
    return hi
