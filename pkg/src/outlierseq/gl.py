"""Exhaustive generalized-likelihood tests.

These are the gold-standard baselines: minimize the empirical divergence
cost over every admissible outlier hypothesis.  The search is exponential
(``C(M,T)`` subsets with T known, all minority subsets otherwise), so both
tests carry enumeration caps with explicit override flags.

Enumeration order is deterministic: subsets in lexicographic index order,
and for the unknown-T test, sizes ascending first.  The first strict
minimum encountered wins, which realizes the documented tie-breaks
(lexicographically smallest list; smaller set first for unknown T).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from ._kernels import IMPL
from .pmf import pmf_matrix

__all__ = [
    "DEFAULT_SUBSET_CAP",
    "DEFAULT_UNKNOWN_M_CAP",
    "EnumerationCapError",
    "GlCostBreakdown",
    "OutlierSet",
    "gl_cost_known_t",
    "gl_cost_unknown",
    "gl_test_known_t",
    "gl_test_unknown",
]

# Subset-count cap for the known-T search and sequence-count cap for the
# unknown-T search; both refusable only with an explicit override.
DEFAULT_SUBSET_CAP = 2_000_000
DEFAULT_UNKNOWN_M_CAP = 24


class EnumerationCapError(RuntimeError):
    """Raised when a GL search would exceed its enumeration cap."""


@dataclass(frozen=True)
class OutlierSet:
    """A hypothesis: a strict minority subset of sequence indices.

    ``indices`` is strictly increasing; ``1 <= |indices| < m/2``.
    """

    indices: tuple[int, ...]
    m: int

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "m", int(self.m))
        self._validate(minority=True)

    def _validate(self, minority: bool) -> None:
        if self.m < 3:
            raise ValueError(f"need m >= 3 sequences, got {self.m}")
        if len(self.indices) < 1:
            raise ValueError("outlier set must be nonempty")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError(f"indices must be strictly increasing, got {self.indices}")
        if self.indices[0] < 0 or self.indices[-1] >= self.m:
            raise ValueError(f"indices must lie in [0, {self.m})")
        if minority and 2 * len(self.indices) >= self.m:
            raise ValueError(f"outlier set size {len(self.indices)} is not a strict minority of {self.m}")

    @classmethod
    def _unchecked_majority_tie(cls, indices: tuple[int, ...], m: int) -> "OutlierSet":
        # Reporting escape hatch for clustering's exact half/half size tie:
        # such a detected set is knowably not a valid hypothesis (it cannot
        # equal any admissible S) but must still be returned, not hidden.
        obj = object.__new__(cls)
        object.__setattr__(obj, "indices", tuple(int(i) for i in indices))
        object.__setattr__(obj, "m", int(m))
        obj._validate(minority=False)
        return obj

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i: int) -> bool:
        return i in self.indices

    def as_set(self) -> frozenset[int]:
        return frozenset(self.indices)

    def complement(self) -> tuple[int, ...]:
        inside = set(self.indices)
        return tuple(i for i in range(self.m) if i not in inside)


@dataclass(frozen=True)
class GlCostBreakdown:
    """The two sums of the unknown-T objective, in nats."""

    typical_cost: float
    outlier_cost: float
    total: float

    def __post_init__(self) -> None:
        if self.total != self.typical_cost + self.outlier_cost:
            raise ValueError("total must equal typical_cost + outlier_cost exactly")


def _matrix_for(gammas, s: OutlierSet | None = None) -> np.ndarray:
    mat = pmf_matrix(gammas)
    if mat.shape[0] < 3:
        raise ValueError(f"need at least 3 sequences, got {mat.shape[0]}")
    if s is not None and s.m != mat.shape[0]:
        raise ValueError(f"hypothesis is over m={s.m} sequences but {mat.shape[0]} were given")
    return mat


def gl_cost_known_t(gammas, s: OutlierSet) -> float:
    """Known-T objective: sum over the complement of D(gamma_j || complement mean)."""
    mat = _matrix_for(gammas, s)
    keep = np.asarray(s.complement(), dtype=np.int64)
    return float(IMPL.group_cost(mat, keep))


def gl_test_known_t(gammas, t: int, *, subset_cap: int = DEFAULT_SUBSET_CAP, override: bool = False) -> OutlierSet:
    """Exhaustive known-T test: the size-t subset minimizing gl_cost_known_t."""
    mat = _matrix_for(gammas)
    m = mat.shape[0]
    if not 1 <= t < m / 2:
        raise ValueError(f"t must satisfy 1 <= t < M/2 = {m / 2}, got {t}")
    n_subsets = comb(m, t)
    if n_subsets > subset_cap and not override:
        raise EnumerationCapError(
            f"C({m},{t}) = {n_subsets} subsets exceeds the cap of {subset_cap}; pass override=True to search anyway"
        )
    best, _ = IMPL.gl_known_scan(mat, t)
    return OutlierSet(tuple(int(i) for i in best), m)


def gl_cost_unknown(gammas, s: OutlierSet) -> GlCostBreakdown:
    """Unknown-T objective: divergence cost of the complement plus that of s."""
    mat = _matrix_for(gammas, s)
    keep = np.asarray(s.complement(), dtype=np.int64)
    out_idx = np.asarray(s.indices, dtype=np.int64)
    typical = float(IMPL.group_cost(mat, keep))
    outlier = float(IMPL.group_cost(mat, out_idx))
    return GlCostBreakdown(typical, outlier, typical + outlier)


def gl_test_unknown(gammas, *, m_cap: int = DEFAULT_UNKNOWN_M_CAP, override: bool = False) -> OutlierSet:
    """Exhaustive unknown-T test over every minority subset.

    Ties prefer the smaller subset, then the lexicographically smallest.
    """
    mat = _matrix_for(gammas)
    m = mat.shape[0]
    if m > m_cap and not override:
        raise EnumerationCapError(
            f"M={m} exceeds the unknown-T enumeration cap of {m_cap} "
            f"(the search visits all minority subsets); pass override=True to search anyway"
        )
    max_size = (m - 1) // 2
    best, _ = IMPL.gl_unknown_scan(mat, max_size)
    return OutlierSet(tuple(int(i) for i in best), m)
