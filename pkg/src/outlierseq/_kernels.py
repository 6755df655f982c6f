"""Numeric kernels behind the detection tests.

Two complete implementations live here:

* loop kernels compiled with numba's ``@njit`` (default when numba imports),
* vectorized pure-numpy fallbacks with identical semantics.

Selection is made once at import time from the environment variable
``OUTLIERSEQ_BACKEND``: ``auto`` (default), ``numba``, or ``numpy``.
Both backends are importable side by side (``NUMPY_IMPL`` / ``NUMBA_IMPL``)
so the equivalence tests and ``benchmarks/bench_kernels.py`` can compare
them directly.

All kernels take row-stochastic float64 matrices (one empirical pmf per
row) and use extended KL semantics: mass over a zero coordinate of the
center yields +inf, which orders above every finite value.  Tie-breaks
are always "smaller index wins" and assignment ties go to cluster 1.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

__all__ = ["BACKEND", "IMPL", "NUMPY_IMPL", "NUMBA_IMPL"]

_ENV_FLAG = "OUTLIERSEQ_BACKEND"


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _np_kl_rows(gmat: np.ndarray, center: np.ndarray) -> np.ndarray:
    """D(row_i || center) for every row, extended conventions.

    Row sums are clamped at 0: KL is nonnegative, but a float sum of
    mixed-sign terms can land a few ulp below zero for near-equal inputs.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = gmat * (np.log(gmat) - np.log(center))
    terms = np.where(gmat > 0.0, terms, 0.0)
    return np.maximum(terms.sum(axis=1), 0.0)


def _np_kth_smallest(values: np.ndarray, k: int) -> tuple[float, int]:
    """k-th smallest (1-indexed), ties broken by smaller original index."""
    v = np.partition(values, k - 1)[k - 1]
    less = int(np.count_nonzero(values < v))
    eq_idx = np.flatnonzero(values == v)
    return float(v), int(eq_idx[k - 1 - less])


def _np_top_t(values: np.ndarray, t: int) -> np.ndarray:
    """Indices of the t largest values, ties by smaller index, ascending."""
    m = values.shape[0]
    if t == m:
        return np.arange(m, dtype=np.int64)
    v = np.partition(values, m - t)[m - t]
    above = values > v
    need = t - int(np.count_nonzero(above))
    eq_idx = np.flatnonzero(values == v)[:need]
    return np.sort(np.concatenate([np.flatnonzero(above), eq_idx])).astype(np.int64)


def _np_group_cost(gmat: np.ndarray, idx: np.ndarray) -> float:
    """Sum of D(row || group mean) over the rows listed in idx."""
    sub = gmat[idx]
    center = sub.mean(axis=0)
    return float(_np_kl_rows(sub, center).sum())


def _np_mean_rows(gmat: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return gmat[idx].mean(axis=0)


def _np_delta2_iterate(
    gmat: np.ndarray, t: int, center0: np.ndarray, max_iter: int
) -> tuple[np.ndarray, np.ndarray, bool]:
    m = gmat.shape[0]
    center = center0
    s_prev: np.ndarray | None = None
    trace: list[float] = []
    converged = False
    s = np.empty(0, dtype=np.int64)
    for _ in range(max_iter):
        divs = _np_kl_rows(gmat, center)
        s = _np_top_t(divs, t)
        keep = np.setdiff1d(np.arange(m, dtype=np.int64), s, assume_unique=True)
        center = gmat[keep].mean(axis=0)
        trace.append(float(_np_kl_rows(gmat[keep], center).sum()))
        if s_prev is not None and np.array_equal(s, s_prev):
            converged = True
            break
        s_prev = s
    return s, np.asarray(trace), converged


def _np_kmeans2_iterate(
    gmat: np.ndarray, c1: np.ndarray, c2: np.ndarray, max_iter: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, bool, bool]:
    m = gmat.shape[0]
    cen1, cen2 = c1, c2
    prev: np.ndarray | None = None
    trace: list[float] = []
    converged = False
    assign = np.zeros(m, dtype=np.int8)
    for _ in range(max_iter):
        d1 = _np_kl_rows(gmat, cen1)
        d2 = _np_kl_rows(gmat, cen2)
        assign = np.where(d1 <= d2, 0, 1).astype(np.int8)  # ties -> cluster 1
        in1 = assign == 0
        n1 = int(np.count_nonzero(in1))
        if n1 > 0:
            cen1 = gmat[in1].mean(axis=0)
        if n1 < m:
            cen2 = gmat[~in1].mean(axis=0)
        cost = 0.0
        if n1 > 0:
            cost += float(_np_kl_rows(gmat[in1], cen1).sum())
        if n1 < m:
            cost += float(_np_kl_rows(gmat[~in1], cen2).sum())
        trace.append(cost)
        if prev is not None and np.array_equal(assign, prev):
            converged = True
            break
        prev = assign
    n1 = int(np.count_nonzero(assign == 0))
    degenerate = n1 == 0 or n1 == m
    return assign, np.asarray(cen1), np.asarray(cen2), np.asarray(trace), converged, degenerate


def _np_gl_known_scan(gmat: np.ndarray, t: int) -> tuple[np.ndarray, float]:
    """Lexicographic scan over all size-t subsets; first strict minimum wins."""
    from itertools import combinations

    m = gmat.shape[0]
    all_idx = np.arange(m, dtype=np.int64)
    best_cost = np.inf
    best: np.ndarray | None = None
    for comb in combinations(range(m), t):
        s = np.asarray(comb, dtype=np.int64)
        keep = np.setdiff1d(all_idx, s, assume_unique=True)
        cost = _np_group_cost(gmat, keep)
        if cost < best_cost:
            best_cost = cost
            best = s
    assert best is not None
    return best, float(best_cost)


def _np_gl_unknown_scan(gmat: np.ndarray, max_size: int) -> tuple[np.ndarray, float]:
    """Sizes ascending then lexicographic; ties keep the earlier subset."""
    from itertools import combinations

    m = gmat.shape[0]
    all_idx = np.arange(m, dtype=np.int64)
    best_cost = np.inf
    best: np.ndarray | None = None
    for size in range(1, max_size + 1):
        for comb in combinations(range(m), size):
            s = np.asarray(comb, dtype=np.int64)
            keep = np.setdiff1d(all_idx, s, assume_unique=True)
            cost = _np_group_cost(gmat, keep) + _np_group_cost(gmat, s)
            if cost < best_cost:
                best_cost = cost
                best = s
    assert best is not None
    return best, float(best_cost)


NUMPY_IMPL = SimpleNamespace(
    name="numpy",
    kl_rows=_np_kl_rows,
    kth_smallest=_np_kth_smallest,
    top_t=_np_top_t,
    group_cost=_np_group_cost,
    mean_rows=_np_mean_rows,
    delta2_iterate=_np_delta2_iterate,
    kmeans2_iterate=_np_kmeans2_iterate,
    gl_known_scan=_np_gl_known_scan,
    gl_unknown_scan=_np_gl_unknown_scan,
)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

def _build_numba_impl() -> SimpleNamespace:
    from numba import njit

    @njit(cache=True)
    def kl_rows(gmat, center):
        m, k = gmat.shape
        out = np.empty(m)
        for i in range(m):
            acc = 0.0
            for y in range(k):
                g = gmat[i, y]
                if g > 0.0:
                    c = center[y]
                    if c <= 0.0:
                        acc = np.inf
                        break
                    acc += g * (np.log(g) - np.log(c))
            out[i] = acc if acc > 0.0 else 0.0
        return out

    @njit(cache=True)
    def kth_smallest(values, k):
        v = np.partition(values, k - 1)[k - 1]
        less = 0
        for x in values:
            if x < v:
                less += 1
        want = k - 1 - less
        seen = 0
        for i in range(values.shape[0]):
            if values[i] == v:
                if seen == want:
                    return v, i
                seen += 1
        return v, -1  # unreachable

    @njit(cache=True)
    def top_t(values, t):
        m = values.shape[0]
        out = np.empty(t, dtype=np.int64)
        if t == m:
            for i in range(m):
                out[i] = i
            return out
        v = np.partition(values, m - t)[m - t]
        above = 0
        for x in values:
            if x > v:
                above += 1
        need = t - above
        pos = 0
        for i in range(m):
            if values[i] > v:
                out[pos] = i
                pos += 1
            elif values[i] == v and need > 0:
                out[pos] = i
                pos += 1
                need -= 1
        return np.sort(out)

    @njit(cache=True)
    def mean_rows(gmat, idx):
        k = gmat.shape[1]
        cnt = idx.shape[0]
        center = np.zeros(k)
        for ii in range(cnt):
            row = idx[ii]
            for y in range(k):
                center[y] += gmat[row, y]
        for y in range(k):
            center[y] /= cnt
        return center

    @njit(cache=True)
    def _sum_kl(gmat, idx, center):
        total = 0.0
        for ii in range(idx.shape[0]):
            row = idx[ii]
            acc = 0.0
            for y in range(gmat.shape[1]):
                g = gmat[row, y]
                if g > 0.0:
                    c = center[y]
                    if c <= 0.0:
                        return np.inf
                    acc += g * (np.log(g) - np.log(c))
            if acc > 0.0:
                total += acc
        return total

    @njit(cache=True)
    def group_cost(gmat, idx):
        return _sum_kl(gmat, idx, mean_rows(gmat, idx))

    @njit(cache=True)
    def _complement(idx, m):
        out = np.empty(m - idx.shape[0], dtype=np.int64)
        pos = 0
        ptr = 0
        for i in range(m):
            if ptr < idx.shape[0] and idx[ptr] == i:
                ptr += 1
            else:
                out[pos] = i
                pos += 1
        return out

    @njit(cache=True)
    def delta2_iterate(gmat, t, center0, max_iter):
        m = gmat.shape[0]
        center = center0.copy()
        trace = np.empty(max_iter)
        s_prev = np.full(t, -1, dtype=np.int64)
        s = np.empty(t, dtype=np.int64)
        converged = False
        it = 0
        while it < max_iter:
            divs = kl_rows(gmat, center)
            s = top_t(divs, t)
            keep = _complement(s, m)
            center = mean_rows(gmat, keep)
            trace[it] = _sum_kl(gmat, keep, center)
            it += 1
            same = True
            for j in range(t):
                if s[j] != s_prev[j]:
                    same = False
                    break
            if same:
                converged = True
                break
            s_prev[:] = s
        return s, trace[:it].copy(), converged

    @njit(cache=True)
    def kmeans2_iterate(gmat, c1, c2, max_iter):
        m = gmat.shape[0]
        cen1 = c1.copy()
        cen2 = c2.copy()
        assign = np.zeros(m, dtype=np.int8)
        prev = np.full(m, -1, dtype=np.int8)
        trace = np.empty(max_iter)
        converged = False
        it = 0
        n1 = 0
        while it < max_iter:
            d1 = kl_rows(gmat, cen1)
            d2 = kl_rows(gmat, cen2)
            n1 = 0
            for i in range(m):
                if d1[i] <= d2[i]:  # ties -> cluster 1
                    assign[i] = 0
                    n1 += 1
                else:
                    assign[i] = 1
            idx1 = np.empty(n1, dtype=np.int64)
            idx2 = np.empty(m - n1, dtype=np.int64)
            p1 = 0
            p2 = 0
            for i in range(m):
                if assign[i] == 0:
                    idx1[p1] = i
                    p1 += 1
                else:
                    idx2[p2] = i
                    p2 += 1
            if n1 > 0:
                cen1 = mean_rows(gmat, idx1)
            if n1 < m:
                cen2 = mean_rows(gmat, idx2)
            cost = 0.0
            if n1 > 0:
                cost += _sum_kl(gmat, idx1, cen1)
            if n1 < m:
                cost += _sum_kl(gmat, idx2, cen2)
            trace[it] = cost
            it += 1
            same = True
            for i in range(m):
                if assign[i] != prev[i]:
                    same = False
                    break
            if same:
                converged = True
                break
            prev[:] = assign
        degenerate = n1 == 0 or n1 == m
        return assign.copy(), cen1, cen2, trace[:it].copy(), converged, degenerate

    @njit(cache=True)
    def _next_combination(comb, m):
        t = comb.shape[0]
        i = t - 1
        while i >= 0 and comb[i] == m - t + i:
            i -= 1
        if i < 0:
            return False
        comb[i] += 1
        for j in range(i + 1, t):
            comb[j] = comb[j - 1] + 1
        return True

    @njit(cache=True)
    def gl_known_scan(gmat, t):
        m = gmat.shape[0]
        comb = np.arange(t, dtype=np.int64)
        best = comb.copy()
        best_cost = np.inf
        while True:
            cost = group_cost(gmat, _complement(comb, m))
            if cost < best_cost:
                best_cost = cost
                best[:] = comb
            if not _next_combination(comb, m):
                break
        return best, best_cost

    @njit(cache=True)
    def gl_unknown_scan(gmat, max_size):
        m = gmat.shape[0]
        best = np.empty(0, dtype=np.int64)
        best_cost = np.inf
        for size in range(1, max_size + 1):
            comb = np.arange(size, dtype=np.int64)
            while True:
                cost = group_cost(gmat, _complement(comb, m)) + group_cost(gmat, comb)
                if cost < best_cost:
                    best_cost = cost
                    best = comb.copy()
                if not _next_combination(comb, m):
                    break
        return best, best_cost

    return SimpleNamespace(
        name="numba",
        kl_rows=kl_rows,
        kth_smallest=kth_smallest,
        top_t=top_t,
        group_cost=group_cost,
        mean_rows=mean_rows,
        delta2_iterate=delta2_iterate,
        kmeans2_iterate=kmeans2_iterate,
        gl_known_scan=gl_known_scan,
        gl_unknown_scan=gl_unknown_scan,
    )


def _select_backend() -> tuple[str, SimpleNamespace, SimpleNamespace | None]:
    choice = os.environ.get(_ENV_FLAG, "auto").strip().lower() or "auto"
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{_ENV_FLAG} must be 'auto', 'numba', or 'numpy', got {choice!r}")
    numba_impl: SimpleNamespace | None = None
    if choice in ("auto", "numba"):
        try:
            numba_impl = _build_numba_impl()
        except ImportError:
            if choice == "numba":
                raise ImportError(f"{_ENV_FLAG}=numba requested but numba is not installed")
    if numba_impl is not None:
        return "numba", numba_impl, numba_impl
    return "numpy", NUMPY_IMPL, None


BACKEND, IMPL, NUMBA_IMPL = _select_backend()
