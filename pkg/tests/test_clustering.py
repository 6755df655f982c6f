"""Clustering detection tests: selection, initializations, delta2, kmeans2, delta3.

Convergence convention used throughout: a run is converged when the
selected set (or assignment vector) repeats between consecutive
iterations, so a fixed point finishes with iterations = 2 and a trailing
confirming pass; ``effective_iterations`` excludes that pass.
"""

import math
from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outlierseq import (
    ClusterState,
    OutlierSet,
    Pmf,
    StopRule,
    TestOutcome,
    delta2,
    delta3,
    gl_cost_known_t,
    gl_test_known_t,
    init_known_t,
    init_unknown,
    kl,
    kmeans2,
    kth_smallest,
    top_t_largest,
)
from outlierseq.clustering import UNTIL_CONVERGENCE


def pmfs(*rows) -> list[Pmf]:
    return [Pmf(np.array(r, dtype=float)) for r in rows]


def random_pmfs(rng, m, k):
    v = rng.random((m, k)) + 1e-3
    return [Pmf(row / row.sum()) for row in v]


def two_group_instance(rng, m, t, spread=0.01):
    """t pmfs near (0.8, 0.2) at the front, m-t near (0.2, 0.8) behind."""
    rows = []
    for i in range(m):
        base = np.array([0.8, 0.2]) if i < t else np.array([0.2, 0.8])
        v = np.clip(base + rng.normal(0, spread, 2), 1e-4, None)
        rows.append(Pmf(v / v.sum()))
    return rows


class TestStopRule:
    def test_default_until_convergence(self):
        rule = StopRule()
        assert not rule.is_fixed
        assert rule.limit == 100
        assert rule.max_iterations == UNTIL_CONVERGENCE

    def test_fixed(self):
        rule = StopRule.fixed(3)
        assert rule.is_fixed and rule.limit == 3

    def test_validation(self):
        with pytest.raises(ValueError):
            StopRule.fixed(0)
        with pytest.raises(ValueError):
            StopRule(max_iterations="forever")
        with pytest.raises(ValueError):
            StopRule(max_iterations=2.5)
        with pytest.raises(ValueError):
            StopRule.until_convergence(cap=0)


class TestTestOutcome:
    def test_trace_must_be_nonincreasing(self):
        with pytest.raises(ValueError, match="increased"):
            TestOutcome(OutlierSet((0,), 3), 2, (0.1, 0.2), True)

    def test_iterations_must_match_trace(self):
        with pytest.raises(ValueError, match="iterations"):
            TestOutcome(OutlierSet((0,), 3), 3, (0.2, 0.1), True)

    def test_detected_none_iff_degenerate(self):
        with pytest.raises(ValueError, match="degenerate"):
            TestOutcome(None, 1, (0.0,), True, degenerate=False)
        with pytest.raises(ValueError, match="degenerate"):
            TestOutcome(OutlierSet((0,), 3), 1, (0.0,), True, degenerate=True)

    def test_effective_iterations(self):
        out = TestOutcome(OutlierSet((0,), 3), 2, (0.5, 0.5), True)
        assert out.effective_iterations == 1
        capped = TestOutcome(OutlierSet((0,), 3), 2, (0.5, 0.4), False)
        assert capped.effective_iterations == 2


class TestClusterState:
    def test_validation(self):
        c = (Pmf(np.array([0.5, 0.5])), Pmf(np.array([0.9, 0.1])))
        with pytest.raises(ValueError, match="empty cluster"):
            ClusterState(c, (0, 0, 0), converged=True)
        state = ClusterState(c, (0, 0, 0), converged=True, degenerate=True)
        assert state.cluster_indices(0) == (0, 1, 2)
        assert state.cluster_indices(1) == ()
        with pytest.raises(ValueError, match="reference"):
            ClusterState(c, (0, 2, 1))


class TestKthSmallest:
    def test_plain_rank(self):
        assert kth_smallest([0.9, 0.1, 0.5, 0.3, 0.7], 3) == (0.5, 2)

    def test_tie_break_by_index(self):
        assert kth_smallest([1, 1, 1], 2) == (1.0, 1)

    def test_infinity_sorts_last(self):
        vals = [math.inf, 0.2, math.inf, 0.1]
        assert kth_smallest(vals, 1) == (0.1, 3)
        assert kth_smallest(vals, 3) == (math.inf, 0)
        assert kth_smallest(vals, 4) == (math.inf, 2)

    def test_rank_out_of_range(self):
        with pytest.raises(ValueError, match=r"\[1, 3\]"):
            kth_smallest([1.0, 2.0, 3.0], 4)
        with pytest.raises(ValueError):
            kth_smallest([1.0], 0)

    def test_nan_rejected(self):
        with pytest.raises(ValueError, match="NaN"):
            kth_smallest([0.1, math.nan], 1)

    def test_large_input_matches_sort_oracle(self, rng):
        vals = np.round(rng.random(100_000), 4)  # heavy ties
        order = np.lexsort((np.arange(len(vals)), vals))
        for k in (1, 37, 50_000, 100_000):
            idx = order[k - 1]
            assert kth_smallest(vals, k) == (float(vals[idx]), int(idx))


class TestTopTLargest:
    def test_plain(self):
        assert top_t_largest([0.9, 0.1, 0.5], 1) == {0}

    def test_tie_break(self):
        assert top_t_largest([0.5, 0.5, 0.1], 1) == {0}
        assert top_t_largest([0.5, 0.5, 0.5], 2) == {0, 1}

    def test_infinities(self):
        assert top_t_largest([0.3, math.inf, 0.5, math.inf], 2) == {1, 3}
        assert top_t_largest([0.3, math.inf, 0.5, math.inf], 3) == {1, 2, 3}

    def test_t_out_of_range(self):
        with pytest.raises(ValueError):
            top_t_largest([1.0, 2.0], 3)
        with pytest.raises(ValueError):
            top_t_largest([1.0, 2.0], 0)

    def test_matches_sort_oracle(self, rng):
        vals = np.round(rng.random(10_000), 3)
        expected = set()
        order = np.lexsort((np.arange(len(vals)), -vals))
        expected = {int(i) for i in order[:17]}
        assert top_t_largest(vals, 17) == expected


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.one_of(st.floats(0, 1), st.sampled_from([0.25, 0.5, math.inf])),
        min_size=1,
        max_size=12,
    ),
    st.data(),
)
def test_selection_property_vs_sort(values, data):
    """Every admissible rank and t agrees with a stable-sort oracle."""
    arr = np.array(values)
    k = data.draw(st.integers(1, len(values)))
    order = np.lexsort((np.arange(len(arr)), arr))
    idx = order[k - 1]
    assert kth_smallest(arr, k) == (float(arr[idx]), int(idx))
    t = data.draw(st.integers(1, len(values)))
    desc = np.lexsort((np.arange(len(arr)), -arr))
    assert top_t_largest(arr, t) == {int(i) for i in desc[:t]}


def pmf_along_path(probe: Pmf, far: Pmf, target_div: float) -> Pmf:
    """Bisect the mixture path from probe to far for a given KL to probe."""
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = (lo + hi) / 2
        cand = Pmf((1 - mid) * probe.probs + mid * far.probs)
        if kl(cand, probe) < target_div:
            lo = mid
        else:
            hi = mid
    return Pmf((1 - hi) * probe.probs + hi * far.probs)


class TestInitKnownT:
    def test_rank_middle_pick(self):
        """Divergences to the probe near (0, 0.01, 0.02, 0.9, 1.1): rank 3 of 5 wins."""
        probe = Pmf(np.array([0.4, 0.4, 0.2]))
        far = Pmf(np.array([0.001, 0.001, 0.998]))
        targets = [0.01, 0.02, 0.9, 1.1]
        g = [probe] + [pmf_along_path(probe, far, d) for d in targets]
        divs = [kl(x, probe) for x in g]
        assert divs[0] == 0.0
        np.testing.assert_allclose(divs[1:], targets, rtol=1e-6)
        assert init_known_t(g, probe_index=0) == g[2]

    def test_all_identical_returns_common(self):
        g = pmfs(*[(0.3, 0.7)] * 5)
        assert init_known_t(g) == g[0]

    def test_probe_on_outlier_still_picks_typical(self, rng):
        """M=10 with 4 outliers: rank ceil(M/2)=5 clears the outlier block."""
        g = two_group_instance(rng, 10, 4)
        pick = init_known_t(g, probe_index=0)  # probe is an outlier
        assert pick in g[4:]

    def test_probe_index_validated(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        with pytest.raises(ValueError, match="probe_index"):
            init_known_t(g, probe_index=3)


class TestDelta2:
    def test_three_sequences(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        out = delta2(g, 1)
        assert out.detected.as_set() == {2}
        assert out.converged
        assert out.iterations == len(out.cost_trace)

    def test_all_identical_tie_break(self):
        g = pmfs(*[(0.5, 0.5)] * 6)
        out = delta2(g, 1)
        assert out.detected.as_set() == {0}
        assert out.converged
        assert out.iterations == 2  # fixed point: second pass confirms the first
        assert out.cost_trace == (0.0, 0.0)
        assert out.effective_iterations == 1

    def test_converged_matches_gl_on_separated_instance(self, rng):
        for _ in range(10):
            g = two_group_instance(rng, 12, 3)
            out = delta2(g, 3)
            assert out.converged
            assert out.detected.as_set() == gl_test_known_t(g, 3).as_set() == {0, 1, 2}

    def test_one_step_is_init_plus_one_selection(self, rng):
        for _ in range(50):
            m = int(rng.integers(4, 12))
            t = int(rng.integers(1, (m - 1) // 2 + 1))
            probe = int(rng.integers(m))
            g = random_pmfs(rng, m, 3)
            out = delta2(g, t, stop=StopRule.fixed(1), probe_index=probe)
            assert not out.converged
            assert out.iterations == 1
            center0 = init_known_t(g, probe_index=probe)
            manual = top_t_largest([kl(x, center0) for x in g], t)
            assert out.detected.as_set() == manual

    def test_t_range_validated(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        with pytest.raises(ValueError, match="1 <= t < M/2"):
            delta2(g, 2)

    def test_trace_nonincreasing_on_random_instances(self, rng):
        for _ in range(100):
            g = random_pmfs(rng, int(rng.integers(5, 10)), 4)
            out = delta2(g, 2)
            for a, b in zip(out.cost_trace, out.cost_trace[1:]):
                assert b <= a

    def test_relabeling_invariance(self, rng):
        for _ in range(30):
            m = 9
            g = random_pmfs(rng, m, 3)
            probe = int(rng.integers(m))
            base = delta2(g, 2, probe_index=probe).detected.as_set()
            perm = list(rng.permutation(m))
            g_perm = [g[perm[i]] for i in range(m)]
            out = delta2(g_perm, 2, probe_index=perm.index(probe)).detected.as_set()
            assert {perm[i] for i in out} == base


class TestInitUnknown:
    def test_farthest_becomes_first_center(self):
        g = pmfs((0.5, 0.5), (0.52, 0.48), (0.9, 0.1))
        c1, c2 = init_unknown(g, probe_index=0)
        assert c1 == g[2]
        assert c2 == g[0]

    def test_all_identical(self):
        g = pmfs(*[(0.4, 0.6)] * 4)
        c1, c2 = init_unknown(g)
        assert c1 == c2 == g[0]

    def test_probe_on_outlier_puts_c1_in_typical_group(self, rng):
        g = two_group_instance(rng, 8, 2)
        c1, c2 = init_unknown(g, probe_index=0)
        assert c1 in g[2:]
        assert c2 == g[0]


class TestKmeans2:
    def test_fixed_point_converges_with_zero_cost(self):
        g = pmfs((0.9, 0.1), (0.9, 0.1), (0.5, 0.5))
        state, trace = kmeans2(g, g[0], g[2])
        assert state.converged and not state.degenerate
        assert state.assignment == (0, 0, 1)
        assert trace == (0.0, 0.0)  # fixed point plus its confirming pass
        assert state.centers[0] == g[0] and state.centers[1] == g[2]

    def test_identical_data_distinct_centers_degenerates(self):
        g = pmfs(*[(0.5, 0.5)] * 4)
        state, trace = kmeans2(g, Pmf(np.array([0.45, 0.55])), Pmf(np.array([0.55, 0.45])))
        assert state.degenerate
        assert set(state.assignment) == {0}  # equal divergences tie to cluster 1

    def test_matches_brute_force_partition_oracle(self, rng):
        """Separated M=10: the converged partition is the global cost minimum."""
        g = two_group_instance(rng, 10, 4)
        mat = np.stack([p.probs for p in g])
        c1, c2 = init_unknown(g, probe_index=5)
        state, trace = kmeans2(g, c1, c2)
        assert state.converged

        def part_cost(mask):
            total = 0.0
            for side in (mask, ~mask):
                sub = mat[side]
                center = sub.mean(axis=0)
                for row in sub:
                    total += max(0.0, float(np.sum(row * (np.log(row) - np.log(center)))))
            return total

        best_cost, best_mask = math.inf, None
        for bits in product([0, 1], repeat=9):
            mask = np.array([True] + [b == 1 for b in bits])
            if mask.all():
                continue
            cost = part_cost(mask)
            if cost < best_cost:
                best_cost, best_mask = cost, mask
        got = np.array([a == state.assignment[0] for a in state.assignment])
        assert np.array_equal(got, best_mask)
        assert trace[-1] == pytest.approx(best_cost, rel=1e-10)

    def test_halts_on_random_instances(self, rng):
        """Finite assignment space + nonincreasing cost: must converge under the cap."""
        for _ in range(10_000):
            m = int(rng.integers(3, 9))
            k = int(rng.integers(2, 5))
            v = rng.random((m, k)) + 1e-3
            g = [Pmf(row / row.sum()) for row in v]
            i, j = rng.choice(m, size=2, replace=False)
            state, trace = kmeans2(g, g[int(i)], g[int(j)])
            assert state.converged
            assert len(trace) <= 100
            for a, b in zip(trace, trace[1:]):
                assert b <= a

    def test_center_shape_validated(self):
        g = pmfs((0.5, 0.5), (0.5, 0.5), (0.9, 0.1))
        with pytest.raises(ValueError, match="alphabet"):
            kmeans2(g, Pmf(np.array([0.2, 0.3, 0.5])), g[0])


class TestDelta3:
    def test_two_vs_three(self):
        g = pmfs((0.1, 0.9), (0.9, 0.1), (0.12, 0.88), (0.88, 0.12), (0.11, 0.89))
        out = delta3(g)
        assert out.detected.as_set() == {1, 3}
        assert out.converged and not out.degenerate

    def test_all_identical_degenerates(self):
        g = pmfs(*[(0.5, 0.5)] * 5)
        out = delta3(g)
        assert out.degenerate
        assert out.detected is None

    def test_exact_size_tie_takes_farther_cluster(self, rng):
        # 2 vs 2 split: the pair farther from the overall mean is reported
        g = pmfs((0.9, 0.1), (0.88, 0.12), (0.3, 0.7), (0.32, 0.68))
        out = delta3(g, probe_index=2)
        assert out.detected is not None
        assert len(out.detected) == 2
        overall = Pmf(np.stack([p.probs for p in g]).mean(axis=0))
        chosen = [g[i] for i in out.detected]
        other = [g[i] for i in range(4) if i not in out.detected]
        d_chosen = kl(Pmf(np.stack([p.probs for p in chosen]).mean(axis=0)), overall)
        d_other = kl(Pmf(np.stack([p.probs for p in other]).mean(axis=0)), overall)
        assert d_chosen >= d_other

    def test_relabeling_invariance(self, rng):
        for _ in range(30):
            m = 9
            g = random_pmfs(rng, m, 3)
            probe = int(rng.integers(m))
            base = delta3(g, probe_index=probe)
            perm = list(rng.permutation(m))
            g_perm = [g[perm[i]] for i in range(m)]
            out = delta3(g_perm, probe_index=perm.index(probe))
            if base.degenerate:
                assert out.degenerate
            else:
                assert {perm[i] for i in out.detected.as_set()} == base.detected.as_set()

    def test_fixed_budget_variant(self, rng):
        g = two_group_instance(rng, 8, 2)
        out = delta3(g, stop=StopRule.fixed(1))
        assert out.iterations == 1
        assert not out.converged


def test_delta2_cost_never_beats_exhaustive_minimum(rng):
    """Local search is bounded below by the global minimum; they agree on
    separated instances at large n in at least 95% of seeded trials."""
    import outlierseq as oq

    equal = 0
    trials = 100
    spec = oq.ScenarioSpec(oq.KIND_DISTINCT_OUTLIERS, m=8, t=2, alphabet_size=4)
    for trial in range(trials):
        trial_rng = oq.trial_rng(3, 1000, trial)
        scen, probe, gmat = oq.realize_trial(spec.realize(trial_rng), 1000, trial_rng)
        g = [Pmf(row) for row in gmat]
        out = delta2(g, 2, probe_index=probe)
        cost = gl_cost_known_t(g, out.detected)
        best = gl_test_known_t(g, 2)
        best_cost = gl_cost_known_t(g, best)
        assert cost >= best_cost - 1e-12
        if abs(cost - best_cost) <= 1e-12:
            equal += 1
    assert equal / trials >= 0.95


def test_iteration_cap_warns_without_convergence():
    """A tiny until-convergence cap that cuts the run short must warn."""
    rng = np.random.default_rng(5)
    g = random_pmfs(rng, 10, 4)
    with pytest.warns(RuntimeWarning, match="cap"):
        delta2(g, 2, stop=StopRule.until_convergence(cap=1))
