"""Seeded Monte Carlo harness for the detection tests.

Scenarios come in three kinds: one typical distribution with distinct
outlier distributions, one typical with one shared outlier distribution,
and two noise clusters of distributions (which must satisfy the strict
separation condition).  A scenario is either fixed (:class:`Scenario`)
or a generator spec (:class:`ScenarioSpec`) that redraws distributions
every trial.

Reproducibility contract: trial ``k`` at sample length ``n`` uses the
generator ``default_rng(SeedSequence(entropy=(master_seed, n, k)))``, and
each trial consumes randomness in a fixed order (scenario realization,
then the probe index, then the sequence counts).  Results are therefore
byte-identical across runs and worker counts, except for
``wall_time_seconds``, which is measurement, not simulation.

Sequences are sampled as multinomial counts: for i.i.d. draws only the
empirical counts matter, and the multinomial is exactly the distribution
of those counts.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis import check_cluster_condition
from .clustering import StopRule, delta2, delta3
from .gl import (
    DEFAULT_SUBSET_CAP,
    DEFAULT_UNKNOWN_M_CAP,
    OutlierSet,
    gl_test_known_t,
    gl_test_unknown,
)
from .pmf import Alphabet, Pmf

__all__ = [
    "KIND_DISTINCT_OUTLIERS",
    "KIND_IDENTICAL_BOTH",
    "KIND_TWO_CLUSTERS",
    "SCENARIO_KINDS",
    "TEST_NAMES",
    "TESTS_NEEDING_T",
    "ConfigurationError",
    "Preset",
    "PRESET_NAMES",
    "Scenario",
    "ScenarioSpec",
    "SimConfig",
    "SimRecord",
    "build_preset",
    "convergence_profile",
    "gen_cluster",
    "gen_random_outliers",
    "realize_trial",
    "run_m_sweep",
    "run_preset",
    "run_sim",
    "trial_rng",
]

KIND_DISTINCT_OUTLIERS = "identical-typical-distinct-outliers"
KIND_IDENTICAL_BOTH = "identical-both"
KIND_TWO_CLUSTERS = "two-clusters"
SCENARIO_KINDS = (KIND_DISTINCT_OUTLIERS, KIND_IDENTICAL_BOTH, KIND_TWO_CLUSTERS)

TEST_NAMES = ("gl-known", "gl-unknown", "delta2", "delta2-1", "delta3", "delta3-1")
TESTS_NEEDING_T = frozenset({"gl-known", "delta2", "delta2-1"})

MIN_OUTLIER_COORD = 1e-6
CLUSTER_FLOOR = 1e-4
MAX_CONSECUTIVE_REJECTS = 10_000


class ConfigurationError(ValueError):
    """A simulation configuration that cannot be run as requested."""


def trial_rng(master_seed: int, n: int, trial: int) -> np.random.Generator:
    """The dedicated generator for one trial.

    Streams are derived as ``SeedSequence(entropy=(master_seed, n,
    trial))`` feeding the default bit generator, so any (n, trial) cell
    can be reproduced in isolation.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=(master_seed, n, trial)))


def gen_random_outliers(
    alphabet: Alphabet,
    count: int,
    rng: np.random.Generator,
    typical: Pmf,
    min_tv_from_typical: float = 0.1,
) -> list[Pmf]:
    """Draw distributions uniformly from the simplex, kept away from the typical one.

    Uniformity comes from normalized unit-rate exponential draws.  A draw
    is rejected when any coordinate is below 1e-6 or its total variation
    to ``typical`` is below the threshold; 10^4 consecutive rejections
    mean the threshold is unsatisfiable and raise a configuration error.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if typical.alphabet != alphabet:
        raise ValueError("typical pmf must live on the target alphabet")
    out: list[Pmf] = []
    consecutive = 0
    while len(out) < count:
        draw = rng.exponential(1.0, alphabet.size)
        draw /= draw.sum()
        if draw.min() < MIN_OUTLIER_COORD or 0.5 * np.abs(draw - typical.probs).sum() < min_tv_from_typical:
            consecutive += 1
            if consecutive >= MAX_CONSECUTIVE_REJECTS:
                raise ConfigurationError(
                    f"rejected {MAX_CONSECUTIVE_REJECTS} consecutive draws: "
                    f"min_tv_from_typical={min_tv_from_typical} is too strict for |Y|={alphabet.size}"
                )
            continue
        consecutive = 0
        out.append(Pmf(draw, alphabet))
    return out


def gen_cluster(center: Pmf, count: int, sigma: float, rng: np.random.Generator) -> list[Pmf]:
    """Distributions scattered around a center by per-coordinate Gaussian noise.

    Each draw is clamped to a 1e-4 floor (guaranteeing full support) and
    renormalized.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    noisy = np.maximum(center.probs + rng.normal(0.0, sigma, size=(count, len(center))), CLUSTER_FLOOR)
    return [Pmf(row / row.sum(), center.alphabet) for row in noisy]


@dataclass(frozen=True)
class Scenario:
    """A fully specified instance: who is typical, who is outlying, and the truth."""

    kind: str
    typical_pmfs: tuple[Pmf, ...]
    outlier_pmfs: tuple[Pmf, ...]
    true_set: OutlierSet

    def __post_init__(self) -> None:
        object.__setattr__(self, "typical_pmfs", tuple(self.typical_pmfs))
        object.__setattr__(self, "outlier_pmfs", tuple(self.outlier_pmfs))
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"kind must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        if len(self.outlier_pmfs) != len(self.true_set):
            raise ValueError("need exactly one outlier pmf per true outlier index")
        if len(self.typical_pmfs) + len(self.outlier_pmfs) != self.true_set.m:
            raise ValueError("typical and outlier pmfs must cover all M sequences")
        everyone = self.typical_pmfs + self.outlier_pmfs
        if any(p.alphabet != everyone[0].alphabet for p in everyone):
            raise ValueError("all scenario pmfs must share one alphabet")
        if self.kind in (KIND_DISTINCT_OUTLIERS, KIND_IDENTICAL_BOTH):
            first = self.typical_pmfs[0]
            if any(p != first for p in self.typical_pmfs):
                raise ValueError(f"kind {self.kind!r} requires identical typical pmfs")
        if self.kind == KIND_IDENTICAL_BOTH:
            first = self.outlier_pmfs[0]
            if any(p != first for p in self.outlier_pmfs):
                raise ValueError(f"kind {self.kind!r} requires identical outlier pmfs")
        if self.kind == KIND_DISTINCT_OUTLIERS:
            seen = [p.probs.tobytes() for p in self.outlier_pmfs]
            if len(set(seen)) != len(seen):
                raise ValueError(f"kind {self.kind!r} requires pairwise distinct outlier pmfs")
        if self.kind == KIND_TWO_CLUSTERS:
            verdict = check_cluster_condition(self.typical_pmfs, self.outlier_pmfs)
            if not verdict:
                raise ValueError("two-clusters scenario violates the separation condition:\n" + verdict.describe())

    @property
    def m(self) -> int:
        return self.true_set.m

    @property
    def t(self) -> int:
        return len(self.true_set)

    @property
    def alphabet(self) -> Alphabet:
        return self.typical_pmfs[0].alphabet

    def row_matrix(self) -> np.ndarray:
        """The (M, |Y|) matrix of generating distributions, row i for sequence i."""
        mat = np.empty((self.m, self.alphabet.size))
        outlier_rows = iter(self.outlier_pmfs)
        typical_rows = iter(self.typical_pmfs)
        inside = self.true_set.as_set()
        for i in range(self.m):
            mat[i] = (next(outlier_rows) if i in inside else next(typical_rows)).probs
        return mat


@dataclass(frozen=True)
class ScenarioSpec:
    """Recipe that redraws a :class:`Scenario` each trial.

    The true outlier set is always the first ``t`` indices.  ``typical``
    defaults to uniform.  For two-clusters, ``outlier_center`` (drawn per
    trial when absent) seeds the second cluster; realizations are redrawn
    until the separation condition holds, erroring after
    ``condition_retries`` attempts.
    """

    kind: str
    m: int
    t: int
    alphabet_size: int
    typical: Pmf | None = None
    outlier_center: Pmf | None = None
    min_tv: float = 0.1
    sigma: float = 0.01
    condition_retries: int = 100

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"kind must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        if self.m < 3:
            raise ValueError("m must be >= 3")
        if not 1 <= self.t < self.m / 2:
            raise ValueError(f"t must satisfy 1 <= t < m/2, got t={self.t}, m={self.m}")
        if self.alphabet_size < 2:
            raise ValueError("alphabet_size must be >= 2")
        for p in (self.typical, self.outlier_center):
            if p is not None and len(p) != self.alphabet_size:
                raise ValueError("typical/outlier_center must live on the declared alphabet")
        if not 0.0 <= self.min_tv < 1.0:
            raise ValueError("min_tv must lie in [0, 1)")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.condition_retries < 1:
            raise ValueError("condition_retries must be >= 1")

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.alphabet_size)

    def typical_pmf(self) -> Pmf:
        if self.typical is not None:
            return self.typical
        return Pmf(np.full(self.alphabet_size, 1.0 / self.alphabet_size), self.alphabet)

    def realize(self, rng: np.random.Generator) -> Scenario:
        typical = self.typical_pmf()
        true_set = OutlierSet(tuple(range(self.t)), self.m)
        n_typical = self.m - self.t
        if self.kind == KIND_DISTINCT_OUTLIERS:
            outliers = gen_random_outliers(self.alphabet, self.t, rng, typical, self.min_tv)
            return Scenario(self.kind, (typical,) * n_typical, tuple(outliers), true_set)
        if self.kind == KIND_IDENTICAL_BOTH:
            mu = gen_random_outliers(self.alphabet, 1, rng, typical, self.min_tv)[0]
            return Scenario(self.kind, (typical,) * n_typical, (mu,) * self.t, true_set)
        for _ in range(self.condition_retries):
            center = self.outlier_center
            if center is None:
                center = gen_random_outliers(self.alphabet, 1, rng, typical, self.min_tv)[0]
            typicals = gen_cluster(typical, n_typical, self.sigma, rng)
            outliers = gen_cluster(center, self.t, self.sigma, rng)
            if check_cluster_condition(typicals, outliers):
                return Scenario(self.kind, tuple(typicals), tuple(outliers), true_set)
        raise ConfigurationError(
            f"no draw satisfied the separation condition in {self.condition_retries} attempts; "
            "widen min_tv or shrink sigma"
        )


@dataclass(frozen=True)
class SimConfig:
    """One harness run: a scenario, sample lengths, trial count, seed, tests."""

    scenario: Scenario | ScenarioSpec
    n_grid: tuple[int, ...]
    trials: int
    master_seed: int = 0
    tests: tuple[str, ...] = ("delta2",)
    t_known: int | None = None
    override_caps: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "tests", tuple(self.tests))
        if not isinstance(self.scenario, (Scenario, ScenarioSpec)):
            raise ValueError("scenario must be a Scenario or a ScenarioSpec")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ValueError("n_grid must be a nonempty list of positive lengths")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be a nonnegative integer")
        if not self.tests:
            raise ValueError("select at least one test")
        unknown = [t for t in self.tests if t not in TEST_NAMES]
        if unknown:
            raise ValueError(f"unknown tests {unknown}; choose from {TEST_NAMES}")
        if len(set(self.tests)) != len(self.tests):
            raise ValueError("tests must not repeat")
        m = self.scenario.m
        if self.t_known is not None and not 1 <= self.t_known < m / 2:
            raise ValueError(f"t_known must satisfy 1 <= t < M/2, got {self.t_known}")

    @property
    def effective_t(self) -> int:
        return self.t_known if self.t_known is not None else self.scenario.t


@dataclass(frozen=True)
class SimRecord:
    """One results row: a (test, grid point) cell of a run."""

    test_name: str
    scenario_kind: str
    m: int
    t: int
    n: int
    trials: int
    errors: int
    error_rate: float
    avg_iterations: float
    seed: int
    wall_time_seconds: float

    def __post_init__(self) -> None:
        if not 0 <= self.errors <= self.trials:
            raise ValueError("errors must lie in [0, trials]")
        if self.error_rate != self.errors / self.trials:
            raise ValueError("error_rate must equal errors/trials exactly")

    def deterministic_part(self) -> tuple:
        """Every field except wall time, which is measurement rather than simulation."""
        return (
            self.test_name,
            self.scenario_kind,
            self.m,
            self.t,
            self.n,
            self.trials,
            self.errors,
            self.error_rate,
            self.avg_iterations,
            self.seed,
        )


def realize_trial(
    scenario: Scenario | ScenarioSpec, n: int, rng: np.random.Generator
) -> tuple[Scenario, int, np.ndarray]:
    """One trial's data: realized scenario, probe index, empirical matrix.

    Randomness is consumed in exactly this order: scenario draws (none
    for a fixed scenario), one probe index, then the per-sequence counts.
    """
    sc = scenario.realize(rng) if isinstance(scenario, ScenarioSpec) else scenario
    probe = int(rng.integers(sc.m))
    counts = rng.multinomial(n, sc.row_matrix())
    return sc, probe, np.ascontiguousarray(counts / float(n))


def _validate_caps(config: SimConfig) -> None:
    m = config.scenario.m
    if "gl-known" in config.tests and not config.override_caps:
        subsets = math.comb(m, config.effective_t)
        if subsets > DEFAULT_SUBSET_CAP:
            raise ConfigurationError(
                f"gl-known would enumerate {subsets} subsets (cap {DEFAULT_SUBSET_CAP}); "
                "set override_caps to force"
            )
    if "gl-unknown" in config.tests and not config.override_caps and m > DEFAULT_UNKNOWN_M_CAP:
        raise ConfigurationError(
            f"gl-unknown is refused above M={DEFAULT_UNKNOWN_M_CAP} (got M={m}); set override_caps to force"
        )


def _make_runners(config: SimConfig):
    """One closure per selected test: empirical matrix + probe -> (detected set or None, iterations)."""
    t = config.effective_t
    override = config.override_caps
    run_forever = StopRule.until_convergence()
    run_once = StopRule.fixed(1)

    def gl_known(gmat, probe):
        return gl_test_known_t(gmat, t, override=override).as_set(), 0.0

    def gl_unknown(gmat, probe):
        return gl_test_unknown(gmat, override=override).as_set(), 0.0

    def clustering_runner(test, stop):
        def run(gmat, probe):
            if test is delta2:
                outcome = delta2(gmat, t, stop, probe_index=probe)
            else:
                outcome = delta3(gmat, stop, probe_index=probe)
            detected = None if outcome.detected is None else outcome.detected.as_set()
            return detected, float(outcome.effective_iterations)

        return run

    table = {
        "gl-known": gl_known,
        "gl-unknown": gl_unknown,
        "delta2": clustering_runner(delta2, run_forever),
        "delta2-1": clustering_runner(delta2, run_once),
        "delta3": clustering_runner(delta3, run_forever),
        "delta3-1": clustering_runner(delta3, run_once),
    }
    return [table[name] for name in config.tests]


def run_sim(config: SimConfig, workers: int = 1) -> list[SimRecord]:
    """Run every selected test on every (n, trial) cell and aggregate.

    All tests see identical trial data (same realized scenario, probe,
    and counts), so per-trial comparisons across tests are meaningful.
    An error is any trial whose detected set differs from the true set
    (a degenerate no-detection outcome counts as an error).  For the
    exhaustive tests ``avg_iterations`` is reported as 0.0: they have no
    iteration notion.  ``wall_time_seconds`` sums the test invocations
    only and is excluded from the determinism guarantee.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    _validate_caps(config)
    runners = _make_runners(config)
    kind = config.scenario.kind
    records: list[SimRecord] = []

    for n in config.n_grid:

        def one_trial(trial: int) -> list[tuple[bool, float, float]]:
            rng = trial_rng(config.master_seed, n, trial)
            sc, probe, gmat = realize_trial(config.scenario, n, rng)
            truth = sc.true_set.as_set()
            cells = []
            for run in runners:
                begin = time.perf_counter()
                detected, iters = run(gmat, probe)
                elapsed = time.perf_counter() - begin
                cells.append((detected != truth, iters, elapsed))
            return cells

        if workers == 1:
            per_trial = [one_trial(k) for k in range(config.trials)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                per_trial = list(pool.map(one_trial, range(config.trials)))

        for j, name in enumerate(config.tests):
            errors = sum(1 for cells in per_trial if cells[j][0])
            iter_sum = 0.0
            time_sum = 0.0
            for cells in per_trial:  # fixed order: identical float sums for any worker count
                iter_sum += cells[j][1]
                time_sum += cells[j][2]
            records.append(
                SimRecord(
                    test_name=name,
                    scenario_kind=kind,
                    m=config.scenario.m,
                    t=config.effective_t,
                    n=n,
                    trials=config.trials,
                    errors=errors,
                    error_rate=errors / config.trials,
                    avg_iterations=iter_sum / config.trials,
                    seed=config.master_seed,
                    wall_time_seconds=time_sum,
                )
            )
    return records


def run_m_sweep(config: SimConfig, m_pairs, workers: int = 1) -> list[SimRecord]:
    """Re-run the config at several (M, T) sizes; needs a generator spec and a single n."""
    if not isinstance(config.scenario, ScenarioSpec):
        raise ConfigurationError("an M sweep needs a generator spec, not a fixed scenario")
    if len(config.n_grid) != 1:
        raise ConfigurationError("an M sweep uses exactly one sample length")
    records: list[SimRecord] = []
    for m, t in m_pairs:
        spec = replace(config.scenario, m=int(m), t=int(t))
        records.extend(run_sim(replace(config, scenario=spec), workers))
    return records


def convergence_profile(
    config: SimConfig, *, m_grid=None, workers: int = 1
) -> list[tuple[int, float]]:
    """Average effective iterations per grid point, against n (default) or against M.

    The config must select exactly one until-convergence clustering test;
    for an M sweep, ``m_grid`` is a list of (M, T) pairs.
    """
    if len(config.tests) != 1 or config.tests[0] not in ("delta2", "delta3"):
        raise ConfigurationError("convergence profiles need exactly one of the tests delta2 or delta3")
    if m_grid is None:
        return [(rec.n, rec.avg_iterations) for rec in run_sim(config, workers)]
    return [(rec.m, rec.avg_iterations) for rec in run_m_sweep(config, m_grid, workers)]


@dataclass(frozen=True)
class Preset:
    """A named, fully resolved experiment: a config plus an optional M sweep."""

    name: str
    config: SimConfig
    m_sweep: tuple[tuple[int, int], ...] | None = None


PRESET_NAMES = ("fig3", "fig4", "fig5", "fig6", "fig7")

_ERROR_CURVE_GRID = (100, 200, 300, 400, 500, 600, 700, 800)
_ITERATION_GRID = (50, 100, 200, 400, 800, 1600)


def build_preset(name: str, trials: int | None = None, master_seed: int = 0) -> Preset:
    """The canonical experiment configurations, at desk-scale trial counts.

    fig3: M=20, T=3, |Y|=10, distinct random outliers; exhaustive known-T
    against delta2 and its one-step variant, error rate vs n.
    fig4: M=100, T=10 with the same scenario kind; delta3 variants only
    (the exhaustive search is far beyond its cap there).
    fig5: as fig4 but with two noise clusters.
    fig6: identical-both, M=100, T=10; delta3 average iterations vs n.
    fig7: identical-both at n=400; delta3 average iterations vs M, T=M/5.
    """
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    if name == "fig3":
        spec = ScenarioSpec(KIND_DISTINCT_OUTLIERS, m=20, t=3, alphabet_size=10)
        return Preset(
            name,
            SimConfig(
                scenario=spec,
                n_grid=_ERROR_CURVE_GRID,
                trials=trials if trials is not None else 2000,
                master_seed=master_seed,
                tests=("gl-known", "delta2", "delta2-1"),
            ),
        )
    if name == "fig4":
        spec = ScenarioSpec(KIND_DISTINCT_OUTLIERS, m=100, t=10, alphabet_size=10)
        return Preset(
            name,
            SimConfig(
                scenario=spec,
                n_grid=_ERROR_CURVE_GRID,
                trials=trials if trials is not None else 2000,
                master_seed=master_seed,
                tests=("delta3", "delta3-1"),
            ),
        )
    if name == "fig5":
        spec = ScenarioSpec(KIND_TWO_CLUSTERS, m=100, t=10, alphabet_size=10)
        return Preset(
            name,
            SimConfig(
                scenario=spec,
                n_grid=_ERROR_CURVE_GRID,
                trials=trials if trials is not None else 2000,
                master_seed=master_seed,
                tests=("delta3", "delta3-1"),
            ),
        )
    if name == "fig6":
        spec = ScenarioSpec(KIND_IDENTICAL_BOTH, m=100, t=10, alphabet_size=10)
        return Preset(
            name,
            SimConfig(
                scenario=spec,
                n_grid=_ITERATION_GRID,
                trials=trials if trials is not None else 500,
                master_seed=master_seed,
                tests=("delta3",),
            ),
        )
    spec = ScenarioSpec(KIND_IDENTICAL_BOTH, m=40, t=8, alphabet_size=10)
    return Preset(
        name,
        SimConfig(
            scenario=spec,
            n_grid=(400,),
            trials=trials if trials is not None else 500,
            master_seed=master_seed,
            tests=("delta3",),
        ),
        m_sweep=tuple((m, m // 5) for m in (40, 80, 120, 160, 200)),
    )


def run_preset(preset: Preset, workers: int = 1) -> list[SimRecord]:
    if preset.m_sweep is not None:
        return run_m_sweep(preset.config, preset.m_sweep, workers)
    return run_sim(preset.config, workers)
