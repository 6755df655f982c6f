"""Finite-alphabet probability vectors and the divergences built on them.

Everything downstream (clustering tests, likelihood baselines, exponent
estimators) works with three ingredients defined here:

* :class:`Pmf` -- a validated probability vector over ``{0, ..., |Y|-1}``,
* :func:`empirical` -- symbol frequencies of one observed sequence,
* :func:`kl` / :func:`bhattacharyya` -- the two divergences, in nats.

All logarithms are natural.  KL uses the extended conventions
``0*log(0/q) = 0`` and ``p > 0 over q = 0 -> +inf``; ``+inf`` is a
representable value that participates in comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Alphabet",
    "Pmf",
    "SequenceSet",
    "average",
    "bhattacharyya",
    "empirical",
    "empirical_smoothed",
    "kl",
    "total_variation",
]

# Construction rejects vectors whose mass deviates from 1 by more than
# RENORM_LIMIT; smaller deviations are silently renormalized so that the
# stored vector sums to 1 within SUM_TOL.
SUM_TOL = 1e-12
RENORM_LIMIT = 1e-9

DEFAULT_SUPPORT_FLOOR = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """Finite symbol set ``{0, ..., size-1}``."""

    size: int

    def __post_init__(self) -> None:
        if not isinstance(self.size, (int, np.integer)) or self.size < 2:
            raise ValueError(f"alphabet size must be an integer >= 2, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over an :class:`Alphabet`.

    Entries must be nonnegative and sum to 1 within ``RENORM_LIMIT``;
    the constructor renormalizes small deviations and rejects larger ones.
    The stored vector is an immutable float64 array.
    """

    probs: np.ndarray
    alphabet: Alphabet = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        vec = np.asarray(self.probs, dtype=np.float64)
        if vec.ndim != 1:
            raise ValueError(f"pmf must be a 1-D vector, got shape {vec.shape}")
        alphabet = self.alphabet if self.alphabet is not None else Alphabet(vec.shape[0])
        if vec.shape[0] != alphabet.size:
            raise ValueError(f"pmf length {vec.shape[0]} does not match alphabet size {alphabet.size}")
        if not np.all(np.isfinite(vec)):
            raise ValueError("pmf entries must be finite")
        if np.any(vec < 0.0):
            raise ValueError("pmf entries must be nonnegative")
        total = float(vec.sum())
        if abs(total - 1.0) > RENORM_LIMIT:
            raise ValueError(f"pmf mass {total!r} deviates from 1 by more than {RENORM_LIMIT}")
        if total != 1.0:
            vec = vec / total
        vec = vec.copy()
        vec.flags.writeable = False
        object.__setattr__(self, "probs", vec)
        object.__setattr__(self, "alphabet", alphabet)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.alphabet == other.alphabet and bool(np.array_equal(self.probs, other.probs))

    def __len__(self) -> int:
        return self.alphabet.size

    def full_support(self, floor: float = DEFAULT_SUPPORT_FLOOR) -> bool:
        """True iff every entry is at least ``floor``."""
        return bool(np.all(self.probs >= floor))


@dataclass(frozen=True, eq=False)
class SequenceSet:
    """M sequences of n categorical observations, as an M x n index matrix."""

    data: np.ndarray
    alphabet: Alphabet

    def __post_init__(self) -> None:
        mat = np.asarray(self.data)
        if mat.ndim != 2:
            raise ValueError(f"sequence data must be 2-D (M x n), got shape {mat.shape}")
        if not np.issubdtype(mat.dtype, np.integer):
            raise ValueError("sequence symbols must be integers")
        m, n = mat.shape
        if m < 3:
            raise ValueError(f"need at least 3 sequences, got {m}")
        if n < 1:
            raise ValueError("sequences must have length >= 1")
        if mat.min() < 0 or mat.max() >= self.alphabet.size:
            raise ValueError(f"symbols must lie in [0, {self.alphabet.size})")
        mat = np.ascontiguousarray(mat, dtype=np.int64)
        mat.flags.writeable = False
        object.__setattr__(self, "data", mat)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def empiricals(self) -> list[Pmf]:
        return [Pmf(row, self.alphabet) for row in self.empirical_matrix()]

    def empirical_matrix(self) -> np.ndarray:
        """Row-stochastic M x |Y| matrix of empirical frequencies."""
        m, n = self.data.shape
        k = self.alphabet.size
        flat = self.data + np.arange(m, dtype=np.int64)[:, None] * k
        counts = np.bincount(flat.ravel(), minlength=m * k).reshape(m, k)
        return counts / float(n)


def empirical(seq: np.ndarray, alphabet: Alphabet) -> Pmf:
    """Empirical distribution of one sequence: ``count(y)/n`` per symbol."""
    return empirical_smoothed(seq, alphabet, 0.0)


def empirical_smoothed(seq: np.ndarray, alphabet: Alphabet, lam: float = 0.0) -> Pmf:
    """Add-lambda smoothed empirical pmf: ``(count(y)+lam) / (n+lam*|Y|)``.

    ``lam=0`` is the plain empirical distribution.  Smoothing is an
    experiment knob only; nothing in this package enables it by default.
    """
    if lam < 0.0:
        raise ValueError("smoothing parameter must be >= 0")
    arr = np.asarray(seq)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise ValueError("sequence must be a nonempty 1-D array")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError("sequence symbols must be integers")
    if arr.min() < 0 or arr.max() >= alphabet.size:
        raise ValueError(f"symbols must lie in [0, {alphabet.size})")
    counts = np.bincount(arr, minlength=alphabet.size).astype(np.float64)
    return Pmf((counts + lam) / (arr.shape[0] + lam * alphabet.size), alphabet)


def _check_same_alphabet(p: Pmf, q: Pmf) -> None:
    if p.alphabet != q.alphabet:
        raise ValueError(f"alphabet mismatch: {p.alphabet} vs {q.alphabet}")


def kl(p: Pmf, q: Pmf) -> float:
    """Extended KL divergence ``D(p||q)`` in nats.

    ``+inf`` when p puts mass on a symbol where q has none.
    """
    _check_same_alphabet(p, q)
    return kl_vec(p.probs, q.probs)


def kl_vec(p: np.ndarray, q: np.ndarray) -> float:
    """KL divergence on raw probability vectors (no validation).

    Clamped at 0: the float sum of mixed-sign terms can land a few ulp
    below zero for near-equal inputs.
    """
    mask = p > 0.0
    qm = q[mask]
    if np.any(qm == 0.0):
        return float("inf")
    pm = p[mask]
    return max(0.0, float(np.sum(pm * (np.log(pm) - np.log(qm)))))


def bhattacharyya(p: Pmf, q: Pmf) -> float:
    """Bhattacharyya distance ``-log sum_y sqrt(p(y) q(y))`` in nats.

    Symmetric; ``+inf`` iff the supports are disjoint.
    """
    _check_same_alphabet(p, q)
    overlap = float(np.sum(np.sqrt(p.probs * q.probs)))
    if overlap == 0.0:
        return float("inf")
    return float(-np.log(overlap))


def average(pmfs: list[Pmf]) -> Pmf:
    """Coordinate-wise arithmetic mean of a nonempty list of pmfs.

    Coordinates are summed exactly (math.fsum), so the result does not
    depend on the order of the list.
    """
    if not pmfs:
        raise ValueError("cannot average an empty list of pmfs")
    alphabet = pmfs[0].alphabet
    for p in pmfs[1:]:
        if p.alphabet != alphabet:
            raise ValueError("all pmfs must share one alphabet")
    stacked = np.stack([p.probs for p in pmfs])
    sums = np.array([math.fsum(stacked[:, j]) for j in range(alphabet.size)])
    return Pmf(sums / len(pmfs), alphabet)


def total_variation(p: Pmf, q: Pmf) -> float:
    """Total variation distance ``0.5 * sum |p - q|``."""
    _check_same_alphabet(p, q)
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def pmf_matrix(gammas) -> np.ndarray:
    """Stack pmfs (or pass through a row-stochastic matrix) as M x |Y| float64.

    Accepts either a sequence of :class:`Pmf` on a common alphabet or a 2-D
    array whose rows are already probability vectors.
    """
    if isinstance(gammas, np.ndarray):
        mat = np.ascontiguousarray(gammas, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[1] < 2:
            raise ValueError(f"expected an M x |Y| matrix with |Y| >= 2, got shape {mat.shape}")
        return mat
    pmfs = list(gammas)
    if not pmfs:
        raise ValueError("need at least one pmf")
    alphabet = pmfs[0].alphabet
    for p in pmfs[1:]:
        if p.alphabet != alphabet:
            raise ValueError("all pmfs must share one alphabet")
    return np.ascontiguousarray(np.stack([p.probs for p in pmfs]))
