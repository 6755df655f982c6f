"""Exhaustive likelihood baselines against independent brute-force oracles.

The oracles here re-enumerate subsets with itertools and evaluate costs
straight from numpy, sharing no code with the package's scan kernels.
"""

import math
from itertools import combinations

import numpy as np
import pytest

from outlierseq import (
    EnumerationCapError,
    GlCostBreakdown,
    OutlierSet,
    Pmf,
    gl_cost_known_t,
    gl_cost_unknown,
    gl_test_known_t,
    gl_test_unknown,
)


def pmfs(*rows) -> list[Pmf]:
    return [Pmf(np.array(r, dtype=float)) for r in rows]


def random_pmfs(rng, m, k):
    v = rng.random((m, k)) + 1e-3
    return [Pmf(row / row.sum()) for row in v]


def oracle_group_cost(mat: np.ndarray, idx: tuple[int, ...]) -> float:
    """Independent evaluation: mean via np.mean, KL term by term."""
    sub = mat[list(idx)]
    center = sub.mean(axis=0)
    total = 0.0
    for row in sub:
        acc = 0.0
        for g, c in zip(row, center):
            if g > 0.0:
                if c == 0.0:
                    return float("inf")
                acc += g * math.log(g / c)
        total += max(acc, 0.0)
    return total


def oracle_known_t(mat: np.ndarray, t: int) -> tuple[int, ...]:
    m = mat.shape[0]
    best, best_cost = None, float("inf")
    for comb in combinations(range(m), t):
        rest = tuple(i for i in range(m) if i not in comb)
        cost = oracle_group_cost(mat, rest)
        if cost < best_cost:
            best, best_cost = comb, cost
    return best


def oracle_unknown(mat: np.ndarray) -> tuple[int, ...]:
    m = mat.shape[0]
    best, best_cost = None, float("inf")
    for size in range(1, (m - 1) // 2 + 1):
        for comb in combinations(range(m), size):
            rest = tuple(i for i in range(m) if i not in comb)
            cost = oracle_group_cost(mat, rest) + oracle_group_cost(mat, comb)
            if cost < best_cost:
                best, best_cost = comb, cost
    return best


class TestOutlierSet:
    def test_basic(self):
        s = OutlierSet((1, 3), 10)
        assert len(s) == 2
        assert 3 in s and 0 not in s
        assert s.as_set() == frozenset({1, 3})
        assert s.complement() == (0, 2, 4, 5, 6, 7, 8, 9)

    def test_requires_strict_minority(self):
        with pytest.raises(ValueError, match="minority"):
            OutlierSet((0, 1), 4)
        OutlierSet((0, 1), 5)  # 2 < 5/2 is fine

    def test_requires_increasing_indices(self):
        with pytest.raises(ValueError, match="increasing"):
            OutlierSet((3, 1), 10)
        with pytest.raises(ValueError, match="increasing"):
            OutlierSet((1, 1), 10)

    def test_requires_nonempty_in_bounds(self):
        with pytest.raises(ValueError, match="nonempty"):
            OutlierSet((), 5)
        with pytest.raises(ValueError, match="lie in"):
            OutlierSet((5,), 5)

    def test_majority_tie_escape_hatch(self):
        s = OutlierSet._unchecked_majority_tie((0, 1), 4)
        assert s.as_set() == frozenset({0, 1})
        # everything else still validated
        with pytest.raises(ValueError):
            OutlierSet._unchecked_majority_tie((1, 0), 4)


class TestGlCostKnownT:
    def test_identical_survivors_cost_zero(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        assert gl_cost_known_t(g, OutlierSet((2,), 3)) == 0.0

    def test_hand_value(self):
        # complement mean is (0.7, 0.3);
        # D((.5,.5)||(.7,.3)) + D((.9,.1)||(.7,.3))
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        expected = (
            0.5 * math.log(0.5 / 0.7)
            + 0.5 * math.log(0.5 / 0.3)
            + 0.9 * math.log(0.9 / 0.7)
            + 0.1 * math.log(0.1 / 0.3)
        )
        got = gl_cost_known_t(g, OutlierSet((0,), 3))
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.20349845015839363, abs=1e-12)

    def test_singleton_complement_is_zero(self):
        # an exact half/half split is not an admissible hypothesis, but the
        # cost function still evaluates it through the reporting escape hatch;
        # complement {3} is a singleton, so D(g3 || g3) = 0
        g = pmfs((0.5, 0.5), (0.3, 0.7), (0.9, 0.1), (0.2, 0.8))
        s = OutlierSet._unchecked_majority_tie((0, 1, 2), 4)
        assert gl_cost_known_t(g, s) == 0.0

    def test_matches_oracle(self, rng):
        for _ in range(30):
            g = random_pmfs(rng, 7, 3)
            mat = np.stack([p.probs for p in g])
            for t in (1, 2, 3):
                for comb in combinations(range(7), t):
                    s = OutlierSet(comb, 7)
                    rest = s.complement()
                    np.testing.assert_allclose(
                        gl_cost_known_t(g, s), oracle_group_cost(mat, rest), rtol=1e-12
                    )

    def test_wrong_m_rejected(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        with pytest.raises(ValueError, match="m=10"):
            gl_cost_known_t(g, OutlierSet((0,), 10))


class TestGlTestKnownT:
    def test_three_singletons(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        assert gl_test_known_t(g, 1).as_set() == {2}

    def test_all_identical_ties_to_lowest_index(self):
        g = pmfs(*[(0.5, 0.5)] * 5)
        assert gl_test_known_t(g, 1).as_set() == {0}
        assert gl_test_known_t(g, 2).as_set() == {0, 1}

    def test_matches_brute_force(self, rng):
        for _ in range(25):
            g = random_pmfs(rng, 6, 3)
            mat = np.stack([p.probs for p in g])
            got = gl_test_known_t(g, 2)
            assert tuple(sorted(got.as_set())) == oracle_known_t(mat, 2)

    def test_argmin_property_exact(self, rng):
        g = random_pmfs(rng, 8, 4)
        best = gl_test_known_t(g, 3)
        best_cost = gl_cost_known_t(g, best)
        for comb in combinations(range(8), 3):
            assert best_cost <= gl_cost_known_t(g, OutlierSet(comb, 8))

    def test_t_range_validated(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        with pytest.raises(ValueError, match="1 <= t < M/2"):
            gl_test_known_t(g, 2)
        with pytest.raises(ValueError):
            gl_test_known_t(g, 0)

    def test_cap_refusal_names_override(self, rng):
        g = random_pmfs(rng, 30, 2)
        with pytest.raises(EnumerationCapError, match="override"):
            gl_test_known_t(g, 14, subset_cap=1000)

    def test_cap_override_searches_anyway(self, rng):
        g = random_pmfs(rng, 8, 2)
        capped = gl_test_known_t(g, 3, subset_cap=1, override=True)
        assert capped.as_set() == gl_test_known_t(g, 3).as_set()


class TestGlCostUnknown:
    def test_breakdown_identity(self, rng):
        g = random_pmfs(rng, 9, 3)
        b = gl_cost_unknown(g, OutlierSet((1, 4), 9))
        assert b.total == b.typical_cost + b.outlier_cost
        assert b.typical_cost >= 0.0 and b.outlier_cost >= 0.0

    def test_two_exact_groups_cost_zero(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1), (0.5, 0.5), (0.5, 0.5))
        b = gl_cost_unknown(g, OutlierSet((2,), 5))
        assert b.total == 0.0

    def test_singleton_outlier_cluster(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        b = gl_cost_unknown(g, OutlierSet((2,), 3))
        assert (b.typical_cost, b.outlier_cost, b.total) == (0.0, 0.0, 0.0)

    def test_breakdown_validation(self):
        with pytest.raises(ValueError, match="exactly"):
            GlCostBreakdown(1.0, 2.0, 3.5)

    def test_relabeling_invariance(self, rng):
        g = random_pmfs(rng, 8, 3)
        s = OutlierSet((0, 5), 8)
        total = gl_cost_unknown(g, s).total
        perm = list(rng.permutation(8))
        g_perm = [g[perm[i]] for i in range(8)]
        s_perm = OutlierSet(tuple(sorted(perm.index(i) for i in s)), 8)
        assert gl_cost_unknown(g_perm, s_perm).total == pytest.approx(total, rel=1e-12)


class TestGlTestUnknown:
    def test_two_vs_three_groups(self):
        g = pmfs((0.88, 0.12), (0.1, 0.9), (0.9, 0.1), (0.12, 0.88), (0.11, 0.89))
        assert gl_test_unknown(g).as_set() == {0, 2}

    def test_all_identical_collapses_to_first_singleton(self):
        g = pmfs(*[(0.3, 0.7)] * 6)
        assert gl_test_unknown(g).as_set() == {0}

    def test_matches_brute_force(self, rng):
        for _ in range(20):
            g = random_pmfs(rng, 8, 3)
            mat = np.stack([p.probs for p in g])
            assert tuple(sorted(gl_test_unknown(g).as_set())) == oracle_unknown(mat)

    def test_cap_refusal(self, rng):
        g = random_pmfs(rng, 30, 2)
        with pytest.raises(EnumerationCapError, match="M=30 exceeds"):
            gl_test_unknown(g)

    def test_cap_override(self, rng):
        g = random_pmfs(rng, 9, 2)
        assert gl_test_unknown(g, m_cap=5, override=True).as_set() == gl_test_unknown(g).as_set()


def test_statistical_recovery_well_separated():
    """Separated instance: exact recovery in at least 99% of seeded trials."""
    import outlierseq as oq

    pi = Pmf(np.full(5, 0.2))
    mu = Pmf(np.array([0.6, 0.1, 0.1, 0.1, 0.1]))
    scen = oq.Scenario(oq.KIND_IDENTICAL_BOTH, (pi,) * 8, (mu, mu), OutlierSet((0, 1), 10))
    cfg = oq.SimConfig(
        scenario=scen, n_grid=(500,), trials=200, master_seed=11, tests=("gl-known",)
    )
    rec = oq.run_sim(cfg)[0]
    assert rec.error_rate <= 0.01
