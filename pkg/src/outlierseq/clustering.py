"""KL-divergence clustering tests: the linear-complexity detectors.

Three layers:

* order statistics (:func:`kth_smallest`, :func:`top_t_largest`) with
  expected-linear selection and smaller-index tie-breaks,
* the two-cluster K-means engine (:func:`kmeans2`) whose per-iteration
  total cost never increases (the cluster mean is the KL barycenter),
* the detection tests themselves: :func:`delta2` when the outlier count
  is known and :func:`delta3` when it is not, each usable either for a
  fixed iteration budget or run to convergence.

Convergence means the assignment (or selected set) repeats between two
consecutive iterations, so a converged run always ends with a confirming
pass; :attr:`TestOutcome.effective_iterations` excludes that pass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import IMPL
from .gl import OutlierSet
from .pmf import Alphabet, Pmf, pmf_matrix

__all__ = [
    "UNTIL_CONVERGENCE",
    "ClusterState",
    "StopRule",
    "TestOutcome",
    "delta2",
    "delta3",
    "init_known_t",
    "init_unknown",
    "kmeans2",
    "kth_smallest",
    "top_t_largest",
]

UNTIL_CONVERGENCE = "until-convergence"

DEFAULT_ITERATION_CAP = 100


@dataclass(frozen=True)
class StopRule:
    """Iteration budget: a fixed count, or run until convergence.

    ``max_iterations`` is either a positive integer (the fixed-budget
    variants of the tests) or the string ``"until-convergence"``, in which
    case ``convergence_cap`` is a safety net only (converging runs finish
    in a handful of iterations; hitting the cap emits a warning).
    """

    max_iterations: int | str = UNTIL_CONVERGENCE
    convergence_cap: int = DEFAULT_ITERATION_CAP

    def __post_init__(self) -> None:
        if isinstance(self.max_iterations, str):
            if self.max_iterations != UNTIL_CONVERGENCE:
                raise ValueError(f"max_iterations must be a positive int or {UNTIL_CONVERGENCE!r}")
        elif isinstance(self.max_iterations, (int, np.integer)):
            if self.max_iterations < 1:
                raise ValueError("max_iterations must be >= 1")
            object.__setattr__(self, "max_iterations", int(self.max_iterations))
        else:
            raise ValueError(f"max_iterations must be a positive int or {UNTIL_CONVERGENCE!r}")
        if self.convergence_cap < 1:
            raise ValueError("convergence_cap must be >= 1")

    @classmethod
    def fixed(cls, iterations: int) -> "StopRule":
        return cls(max_iterations=iterations)

    @classmethod
    def until_convergence(cls, cap: int = DEFAULT_ITERATION_CAP) -> "StopRule":
        return cls(max_iterations=UNTIL_CONVERGENCE, convergence_cap=cap)

    @property
    def is_fixed(self) -> bool:
        return self.max_iterations != UNTIL_CONVERGENCE

    @property
    def limit(self) -> int:
        return self.max_iterations if self.is_fixed else self.convergence_cap


@dataclass(frozen=True)
class TestOutcome:
    """Result of one detection-test run.

    ``detected`` is None exactly when the run was degenerate (a cluster
    emptied, so no outlier group could be identified).  ``cost_trace``
    holds the total cost after each re-estimation and is nonincreasing;
    ``iterations`` equals its length.
    """

    __test__ = False  # pytest must not collect this despite the Test* name

    detected: OutlierSet | None
    iterations: int
    cost_trace: tuple[float, ...]
    converged: bool
    degenerate: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "cost_trace", tuple(float(c) for c in self.cost_trace))
        if self.iterations != len(self.cost_trace):
            raise ValueError("iterations must equal len(cost_trace)")
        for a, b in zip(self.cost_trace, self.cost_trace[1:]):
            if b > a:
                raise ValueError(f"cost trace increased: {a} -> {b}")
        if (self.detected is None) != self.degenerate:
            raise ValueError("detected must be None exactly for degenerate outcomes")

    @property
    def effective_iterations(self) -> int:
        """Iterations that changed the state; a converged run's final confirming pass is excluded."""
        return self.iterations - 1 if self.converged else self.iterations


@dataclass(frozen=True)
class ClusterState:
    """Final state of the two-cluster K-means engine."""

    centers: tuple[Pmf, Pmf]
    assignment: tuple[int, ...]
    k: int = 2
    converged: bool = False
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.k != len(self.centers):
            raise ValueError("k must match the number of centers")
        if any(a not in range(self.k) for a in self.assignment):
            raise ValueError("assignment entries must reference a cluster")
        sizes = [sum(1 for a in self.assignment if a == c) for c in range(self.k)]
        if not self.degenerate and any(s == 0 for s in sizes):
            raise ValueError("non-degenerate state cannot have an empty cluster")

    def cluster_indices(self, c: int) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.assignment) if a == c)


def _as_values(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValueError("values must be a nonempty 1-D sequence")
    if np.any(np.isnan(arr)):
        raise ValueError("values must not contain NaN")
    return arr


def kth_smallest(values, k: int) -> tuple[float, int]:
    """The k-th smallest value (1-indexed) and its original index.

    +inf sorts above every finite value; ties go to the smaller index.
    Runs in expected linear time (introselect partition).
    """
    arr = _as_values(values)
    if not 1 <= k <= arr.shape[0]:
        raise ValueError(f"k must lie in [1, {arr.shape[0]}], got {k}")
    value, idx = IMPL.kth_smallest(arr, int(k))
    return float(value), int(idx)


def top_t_largest(values, t: int) -> set[int]:
    """Original indices of the t largest values; ties favor smaller indices."""
    arr = _as_values(values)
    if not 1 <= t <= arr.shape[0]:
        raise ValueError(f"t must lie in [1, {arr.shape[0]}], got {t}")
    return {int(i) for i in IMPL.top_t(arr, int(t))}


def _prepare(gammas, probe_index: int) -> tuple[np.ndarray, Alphabet]:
    mat = pmf_matrix(gammas)
    if mat.shape[0] < 3:
        raise ValueError(f"need at least 3 sequences, got {mat.shape[0]}")
    if not 0 <= probe_index < mat.shape[0]:
        raise ValueError(f"probe_index must lie in [0, {mat.shape[0]})")
    return mat, Alphabet(mat.shape[1])


def _init_known_index(mat: np.ndarray, probe_index: int) -> int:
    divs = IMPL.kl_rows(mat, mat[probe_index])
    rank = (mat.shape[0] + 1) // 2  # ceil(M/2), 1-indexed
    _, idx = IMPL.kth_smallest(divs, rank)
    return int(idx)


def init_known_t(gammas, probe_index: int = 0) -> Pmf:
    """Initial typical-center estimate for :func:`delta2`.

    Ranks every empirical by its divergence to the probe's empirical and
    returns the one at rank ceil(M/2): under a strict minority of
    outliers, that middle pick is typical-generated with high probability
    whether or not the probe itself is an outlier.
    """
    mat, alphabet = _prepare(gammas, probe_index)
    return Pmf(mat[_init_known_index(mat, probe_index)], alphabet)


def _warn_if_capped(stop: StopRule, converged: bool, what: str) -> None:
    if not stop.is_fixed and not converged:
        warnings.warn(f"{what} hit the {stop.limit}-iteration cap without converging", RuntimeWarning)


def delta2(gammas, t: int, stop: StopRule | None = None, probe_index: int = 0) -> TestOutcome:
    """Detection with known outlier count: iterate top-t exclusion and re-estimation.

    Each iteration removes the t empiricals farthest (in KL) from the
    current typical-center estimate and re-estimates the center as the
    mean of the rest; the recorded cost is the complement's divergence sum
    after re-estimation.  ``stop=StopRule.fixed(1)`` is the one-shot
    variant; the default runs until the selected set repeats.
    """
    stop = stop or StopRule()
    mat, _ = _prepare(gammas, probe_index)
    m = mat.shape[0]
    if not 1 <= t < m / 2:
        raise ValueError(f"t must satisfy 1 <= t < M/2 = {m / 2}, got {t}")
    center0 = mat[_init_known_index(mat, probe_index)]
    s, trace, converged = IMPL.delta2_iterate(mat, int(t), center0, stop.limit)
    _warn_if_capped(stop, converged, "delta2")
    detected = OutlierSet(tuple(int(i) for i in s), m)
    return TestOutcome(detected, len(trace), tuple(trace), bool(converged))


def init_unknown(gammas, probe_index: int = 0) -> tuple[Pmf, Pmf]:
    """Initial centers for :func:`delta3`: the probe's empirical and the one farthest from it."""
    mat, alphabet = _prepare(gammas, probe_index)
    divs = IMPL.kl_rows(mat, mat[probe_index])
    c1 = int(np.argmax(divs))  # first occurrence wins ties
    return Pmf(mat[c1], alphabet), Pmf(mat[probe_index], alphabet)


def kmeans2(gammas, c1: Pmf, c2: Pmf, stop: StopRule | None = None) -> tuple[ClusterState, tuple[float, ...]]:
    """Two-cluster KL K-means from explicit starting centers.

    Assignment minimizes D(empirical || center) with ties to cluster 1;
    re-estimation replaces each nonempty cluster's center by its mean (a
    cluster emptied by assignment keeps its previous center and flags the
    state degenerate).  Stops when the assignment vector repeats the
    previous iteration's, or at the iteration limit.
    """
    stop = stop or StopRule()
    mat, alphabet = _prepare(gammas, 0)
    a1 = np.ascontiguousarray(c1.probs if isinstance(c1, Pmf) else c1, dtype=np.float64)
    a2 = np.ascontiguousarray(c2.probs if isinstance(c2, Pmf) else c2, dtype=np.float64)
    if a1.shape != (mat.shape[1],) or a2.shape != (mat.shape[1],):
        raise ValueError("centers must live on the data's alphabet")
    assign, cen1, cen2, trace, converged, degenerate = IMPL.kmeans2_iterate(mat, a1, a2, stop.limit)
    _warn_if_capped(stop, converged, "kmeans2")
    state = ClusterState(
        centers=(Pmf(cen1, alphabet), Pmf(cen2, alphabet)),
        assignment=tuple(int(a) for a in assign),
        k=2,
        converged=bool(converged),
        degenerate=bool(degenerate),
    )
    return state, tuple(float(c) for c in trace)


def delta3(gammas, stop: StopRule | None = None, probe_index: int = 0) -> TestOutcome:
    """Detection with unknown outlier count: two-cluster K-means, then take the minority.

    The smaller final cluster is reported as the outliers.  On an exact
    size tie the cluster whose center lies farther (in KL) from the mean
    of all M empiricals is reported; if a cluster emptied, the outcome is
    the distinguished degenerate "no outliers found" report rather than a
    silent empty set.
    """
    stop = stop or StopRule()
    mat, _ = _prepare(gammas, probe_index)
    m = mat.shape[0]
    divs = IMPL.kl_rows(mat, mat[probe_index])
    c1 = mat[int(np.argmax(divs))]
    c2 = mat[probe_index]
    assign, cen1, cen2, trace, converged, degenerate = IMPL.kmeans2_iterate(mat, c1, c2, stop.limit)
    _warn_if_capped(stop, converged, "delta3")
    if degenerate:
        return TestOutcome(None, len(trace), tuple(trace), bool(converged), degenerate=True)
    n1 = int(np.count_nonzero(assign == 0))
    n2 = m - n1
    if n1 != n2:
        outlier_cluster = 0 if n1 < n2 else 1
    else:
        overall = mat.mean(axis=0)
        d = IMPL.kl_rows(np.stack([cen1, cen2]), overall)
        outlier_cluster = 0 if d[0] >= d[1] else 1
    idx = tuple(int(i) for i in np.flatnonzero(assign == outlier_cluster))
    if 2 * len(idx) >= m:
        detected = OutlierSet._unchecked_majority_tie(idx, m)
    else:
        detected = OutlierSet(idx, m)
    return TestOutcome(detected, len(trace), tuple(trace), bool(converged))
