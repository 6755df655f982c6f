"""Command-line surface: detect on data files, simulate, and analyze.

Input data format for ``detect``: one sequence per row, comma-separated
nonnegative integer symbols, with an optional first line ``# alphabet=K``;
without the header the alphabet size is one more than the largest symbol.

``simulate`` writes two artifacts: a results CSV with the exact column
order test_name,scenario_kind,M,T,n,trials,errors,error_rate,
avg_iterations,seed,wall_time_seconds, and a JSON run manifest that
round-trips the full resolved configuration.  Seeds default to the
constant 0 and are never read from the environment.

Exit codes: 0 success, 1 invalid input or configuration, 2 usage errors
and refused enumeration caps.
"""

from __future__ import annotations

import csv
import json
import re
import sys
from argparse import ArgumentParser
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    EXPONENT_SET_NAMES,
    bhattacharyya_bound,
    check_cluster_condition,
    estimate_exponent,
    example1_certificate,
    exponent_problem,
    lemma2_closed_form,
    lemma2_oracle,
)
from .clustering import StopRule, delta2, delta3
from .gl import (
    EnumerationCapError,
    OutlierSet,
    gl_cost_known_t,
    gl_cost_unknown,
    gl_test_known_t,
    gl_test_unknown,
)
from .pmf import Alphabet, Pmf, SequenceSet, total_variation
from .simulate import (
    PRESET_NAMES,
    SCENARIO_KINDS,
    TEST_NAMES,
    TESTS_NEEDING_T,
    Scenario,
    ScenarioSpec,
    SimConfig,
    SimRecord,
    build_preset,
    run_preset,
    run_sim,
)

__all__ = [
    "RESULTS_HEADER",
    "RunManifest",
    "build_parser",
    "config_from_dict",
    "config_to_dict",
    "main",
    "parse_sequence_csv",
    "write_results_csv",
]

RESULTS_HEADER = (
    "test_name",
    "scenario_kind",
    "M",
    "T",
    "n",
    "trials",
    "errors",
    "error_rate",
    "avg_iterations",
    "seed",
    "wall_time_seconds",
)


def _parse_pmf(text: str) -> Pmf:
    try:
        values = np.array([float(tok) for tok in text.split(",")])
    except ValueError:
        raise ValueError(f"{text!r} is not a comma-separated list of probabilities") from None
    return Pmf(values)


def _parse_int_grid(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ValueError(f"{text!r} is not a comma-separated list of integers") from None


def parse_sequence_csv(path: str) -> SequenceSet:
    """Read the sequence format; errors name the offending line and column."""
    alphabet_size: int | None = None
    rows: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                match = re.fullmatch(r"#\s*alphabet\s*=\s*(\d+)", line)
                if match is None:
                    raise ValueError(f"line {lineno}: only the header '# alphabet=K' is recognized")
                if alphabet_size is not None or rows:
                    raise ValueError(f"line {lineno}: the alphabet header must appear once, before any data")
                alphabet_size = int(match.group(1))
                continue
            row = []
            for col, tok in enumerate(line.split(","), start=1):
                tok = tok.strip()
                try:
                    value = int(tok)
                    if value < 0:
                        raise ValueError
                except ValueError:
                    raise ValueError(
                        f"line {lineno}, column {col}: {tok!r} is not a nonnegative integer symbol"
                    ) from None
                row.append(value)
            if rows and len(row) != len(rows[0]):
                raise ValueError(f"line {lineno}: expected {len(rows[0])} symbols per row, got {len(row)}")
            rows.append(row)
    if not rows:
        raise ValueError("no sequences found in input")
    if alphabet_size is None:
        alphabet_size = 1 + max(max(r) for r in rows)
        if alphabet_size < 2:
            raise ValueError("data uses a single symbol; declare '# alphabet=K' with K >= 2")
    return SequenceSet(np.array(rows, dtype=np.int64), Alphabet(alphabet_size))


def write_results_csv(records: list[SimRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_HEADER)
        for rec in records:
            writer.writerow(
                [
                    rec.test_name,
                    rec.scenario_kind,
                    rec.m,
                    rec.t,
                    rec.n,
                    rec.trials,
                    rec.errors,
                    repr(rec.error_rate),
                    repr(rec.avg_iterations),
                    rec.seed,
                    repr(rec.wall_time_seconds),
                ]
            )


def _pmf_list(p: Pmf | None) -> list[float] | None:
    return None if p is None else [float(v) for v in p.probs]


def _scenario_to_dict(scenario: Scenario | ScenarioSpec) -> dict:
    if isinstance(scenario, ScenarioSpec):
        return {
            "type": "spec",
            "kind": scenario.kind,
            "m": scenario.m,
            "t": scenario.t,
            "alphabet_size": scenario.alphabet_size,
            "typical": _pmf_list(scenario.typical),
            "outlier_center": _pmf_list(scenario.outlier_center),
            "min_tv": scenario.min_tv,
            "sigma": scenario.sigma,
            "condition_retries": scenario.condition_retries,
        }
    return {
        "type": "fixed",
        "kind": scenario.kind,
        "m": scenario.m,
        "typical_pmfs": [_pmf_list(p) for p in scenario.typical_pmfs],
        "outlier_pmfs": [_pmf_list(p) for p in scenario.outlier_pmfs],
        "true_set": list(scenario.true_set),
    }


def _scenario_from_dict(d: dict) -> Scenario | ScenarioSpec:
    if d["type"] == "spec":
        return ScenarioSpec(
            kind=d["kind"],
            m=d["m"],
            t=d["t"],
            alphabet_size=d["alphabet_size"],
            typical=None if d["typical"] is None else Pmf(np.array(d["typical"])),
            outlier_center=None if d["outlier_center"] is None else Pmf(np.array(d["outlier_center"])),
            min_tv=d["min_tv"],
            sigma=d["sigma"],
            condition_retries=d["condition_retries"],
        )
    return Scenario(
        kind=d["kind"],
        typical_pmfs=tuple(Pmf(np.array(p)) for p in d["typical_pmfs"]),
        outlier_pmfs=tuple(Pmf(np.array(p)) for p in d["outlier_pmfs"]),
        true_set=OutlierSet(tuple(d["true_set"]), d["m"]),
    )


def config_to_dict(config: SimConfig, workers: int = 1, m_sweep=None) -> dict:
    return {
        "scenario": _scenario_to_dict(config.scenario),
        "n_grid": list(config.n_grid),
        "trials": config.trials,
        "master_seed": config.master_seed,
        "tests": list(config.tests),
        "t_known": config.t_known,
        "override_caps": config.override_caps,
        "workers": workers,
        "m_sweep": None if m_sweep is None else [[int(m), int(t)] for m, t in m_sweep],
    }


def config_from_dict(d: dict) -> tuple[SimConfig, int, tuple[tuple[int, int], ...] | None]:
    config = SimConfig(
        scenario=_scenario_from_dict(d["scenario"]),
        n_grid=tuple(d["n_grid"]),
        trials=d["trials"],
        master_seed=d["master_seed"],
        tests=tuple(d["tests"]),
        t_known=d["t_known"],
        override_caps=d["override_caps"],
    )
    sweep = None if d["m_sweep"] is None else tuple((m, t) for m, t in d["m_sweep"])
    return config, d["workers"], sweep


@dataclass(frozen=True)
class RunManifest:
    """Provenance record for a simulate run; serializes losslessly to JSON."""

    subcommand: str
    preset: str | None
    config: dict
    master_seed: int
    version: str
    started_at: str
    finished_at: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------- detect


def cmd_detect(args) -> int:
    sequences = parse_sequence_csv(args.input)
    gmat = sequences.empirical_matrix()
    lines = [f"test: {args.test}"]
    if args.test == "gl-known":
        detected = gl_test_known_t(gmat, args.t, override=args.override_caps)
        lines.append("detected: " + " ".join(str(i) for i in detected))
        lines.append(f"cost: {gl_cost_known_t(gmat, detected):.6f}")
    elif args.test == "gl-unknown":
        detected = gl_test_unknown(gmat, override=args.override_caps)
        lines.append("detected: " + " ".join(str(i) for i in detected))
        lines.append(f"cost: {gl_cost_unknown(gmat, detected).total:.6f}")
    else:
        stop = StopRule.fixed(1) if args.test.endswith("-1") else StopRule.until_convergence()
        if args.test.startswith("delta2"):
            outcome = delta2(gmat, args.t, stop, probe_index=args.probe)
        else:
            outcome = delta3(gmat, stop, probe_index=args.probe)
        if outcome.detected is None:
            lines.append("detected: none (degenerate: a cluster emptied)")
        else:
            lines.append("detected: " + " ".join(str(i) for i in outcome.detected))
        lines.append(f"iterations: {outcome.iterations}")
        lines.append(f"converged: {'yes' if outcome.converged else 'no'}")
        lines.append("cost_trace: " + " ".join(f"{c:.6g}" for c in outcome.cost_trace))
    print("\n".join(lines))
    return 0


# -------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    started = _utc_now()
    inline_flags = [args.scenario, args.m, args.t, args.alphabet_size, args.n_grid]
    if args.preset is not None:
        if any(v is not None for v in inline_flags) or args.tests is not None:
            raise ValueError("--preset conflicts with inline scenario flags; use one or the other")
        preset = build_preset(args.preset, trials=args.trials, master_seed=args.seed)
        config, m_sweep = preset.config, preset.m_sweep
        records = run_preset(preset, workers=args.workers)
    else:
        missing = [
            flag
            for flag, v in zip(("--scenario", "--m", "--t", "--alphabet-size", "--n-grid"), inline_flags)
            if v is None
        ]
        if missing:
            raise ValueError(f"without --preset these flags are required: {', '.join(missing)}")
        spec = ScenarioSpec(
            kind=args.scenario,
            m=args.m,
            t=args.t,
            alphabet_size=args.alphabet_size,
            typical=None if args.typical is None else _parse_pmf(args.typical),
            outlier_center=None if args.outlier_center is None else _parse_pmf(args.outlier_center),
            min_tv=args.min_tv,
            sigma=args.sigma,
        )
        config = SimConfig(
            scenario=spec,
            n_grid=_parse_int_grid(args.n_grid),
            trials=args.trials if args.trials is not None else 2000,
            master_seed=args.seed,
            tests=tuple((args.tests or "delta2").split(",")),
            t_known=args.t_known,
            override_caps=args.override_caps,
        )
        m_sweep = None
        records = run_sim(config, workers=args.workers)
    write_results_csv(records, args.out)
    manifest = RunManifest(
        subcommand="simulate",
        preset=args.preset,
        config=config_to_dict(config, workers=args.workers, m_sweep=m_sweep),
        master_seed=config.master_seed,
        version=__version__,
        started_at=started,
        finished_at=_utc_now(),
    )
    manifest_path = str(Path(args.out).with_suffix(".manifest.json"))
    Path(manifest_path).write_text(manifest.to_json() + "\n", encoding="utf-8")
    print(f"wrote {len(records)} records to {args.out}; manifest at {manifest_path}")
    return 0


# --------------------------------------------------------------- analyze


def _emit(args, payload: dict, text: str) -> int:
    print(json.dumps(payload, indent=2) if args.json else text)
    return 0


def _condition_payload(check) -> dict:
    return {
        "holds": check.holds,
        "max_intra_typical": check.max_intra_typical,
        "max_intra_typical_pair": list(check.max_intra_typical_pair) if check.max_intra_typical_pair else None,
        "max_intra_outlier": check.max_intra_outlier,
        "max_intra_outlier_pair": list(check.max_intra_outlier_pair) if check.max_intra_outlier_pair else None,
        "min_cross": check.min_cross,
        "min_cross_pair": list(check.min_cross_pair),
        "min_cross_orientation": check.min_cross_orientation,
    }


def cmd_cluster_condition(args) -> int:
    check = check_cluster_condition([_parse_pmf(s) for s in args.typical], [_parse_pmf(s) for s in args.outlier])
    return _emit(args, _condition_payload(check), check.describe())


def cmd_lemma2(args) -> int:
    p1, p2 = _parse_pmf(args.p1), _parse_pmf(args.p2)
    grid_min, grid_q = lemma2_oracle(p1, p2, args.step)
    exact, exact_q = lemma2_closed_form(p1, p2)
    gap_tv = total_variation(grid_q, exact_q)
    text = "\n".join(
        [
            f"grid min of D(q||p1) + D(q||p2): {grid_min:.6f} at q = ({', '.join(f'{v:.6g}' for v in grid_q.probs)})",
            f"closed form 2B(p1, p2):         {exact:.6f} at q = ({', '.join(f'{v:.6g}' for v in exact_q.probs)})",
            f"gaps: value {abs(grid_min - exact):.3g}, argmin total variation {gap_tv:.3g}",
        ]
    )
    payload = {
        "grid_min": grid_min,
        "grid_argmin": [float(v) for v in grid_q.probs],
        "closed_form": exact,
        "closed_argmin": [float(v) for v in exact_q.probs],
        "value_gap": abs(grid_min - exact),
        "argmin_tv_gap": gap_tv,
    }
    return _emit(args, payload, text)


def cmd_example1(args) -> int:
    report = example1_certificate(m=args.m)
    payload = {
        "m": report.m,
        "condition": _condition_payload(report.condition),
        "cost_true": asdict(report.cost_true),
        "cost_confused": asdict(report.cost_confused),
        "margin": report.margin,
        "gl_prefers_confused": report.gl_prefers_confused,
        "holds": report.holds,
    }
    return _emit(args, payload, report.describe())


def cmd_exponent(args) -> int:
    typicals = [_parse_pmf(s) for s in args.pi or []]
    outliers = [_parse_pmf(s) for s in args.mu or []]
    problem = exponent_problem(args.set, typicals, outliers)
    estimate = estimate_exponent(problem, args.step)
    constraints = "; ".join(str(c) for c in problem.constraints)
    text = f"set {args.set.upper()} ({constraints})\n{estimate.describe()}"
    payload = {
        "set": args.set.upper(),
        "constraints": [str(c) for c in problem.constraints],
        "value": estimate.value,
        "grid_step": estimate.grid_step,
        "minimizer": [[float(v) for v in q.probs] for q in estimate.minimizer],
        "feasible": estimate.feasible,
        "relaxed_constraints": estimate.relaxed_constraints,
    }
    return _emit(args, payload, text)


def cmd_bhatta_bound(args) -> int:
    value = bhattacharyya_bound(_parse_pmf(args.typical), [_parse_pmf(s) for s in args.outlier])
    return _emit(
        args,
        {"value": value},
        f"min over outliers of 2B(outlier, typical): {value:.6f} nats",
    )


# ---------------------------------------------------------------- parser


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="outlierseq", description="Outlying-sequence detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    detect = sub.add_parser("detect", help="run one test on a sequence CSV file")
    detect.add_argument("input", help="sequence CSV: one row per sequence, comma-separated integer symbols")
    detect.add_argument("--test", required=True, choices=TEST_NAMES, help="which test to run")
    detect.add_argument("--t", type=int, help="number of outliers (required for known-T tests)")
    detect.add_argument("--probe", type=int, default=0, help="probe sequence index for initialization (default 0)")
    detect.add_argument("--override-caps", action="store_true", help="force past the enumeration caps")
    detect.set_defaults(func=cmd_detect)

    simulate = sub.add_parser("simulate", help="run the Monte Carlo harness, writing CSV + manifest")
    simulate.add_argument("--preset", choices=PRESET_NAMES, help="canonical experiment configuration")
    simulate.add_argument("--scenario", choices=SCENARIO_KINDS, help="scenario kind (inline mode)")
    simulate.add_argument("--m", type=int, help="number of sequences M")
    simulate.add_argument("--t", type=int, help="number of outliers T")
    simulate.add_argument("--alphabet-size", type=int, help="alphabet size |Y|")
    simulate.add_argument("--typical", help="typical pmf as comma-separated probabilities (default uniform)")
    simulate.add_argument("--outlier-center", help="two-clusters outlier center pmf (default drawn per trial)")
    simulate.add_argument("--min-tv", type=float, default=0.1, help="rejection radius around the typical pmf")
    simulate.add_argument("--sigma", type=float, default=0.01, help="two-clusters noise scale")
    simulate.add_argument("--n-grid", help="comma-separated sample lengths, strictly increasing")
    simulate.add_argument("--trials", type=int, help="Monte Carlo trials per grid point (default 2000; presets may differ)")
    simulate.add_argument("--seed", type=int, default=0, help="master seed (default 0; the environment is never consulted)")
    simulate.add_argument("--tests", help=f"comma-separated tests from {', '.join(TEST_NAMES)} (default delta2)")
    simulate.add_argument("--t-known", type=int, help="override the T given to known-T tests")
    simulate.add_argument("--override-caps", action="store_true", help="force past the enumeration caps")
    simulate.add_argument("--workers", type=int, default=1, help="parallel trial workers (results are identical)")
    simulate.add_argument("--out", default="results.csv", help="results CSV path (default results.csv)")
    simulate.set_defaults(func=cmd_simulate)

    analyze = sub.add_parser("analyze", help="divergence-analysis reports")
    asub = analyze.add_subparsers(dest="subtask", required=True)

    condition = asub.add_parser("cluster-condition", help="check the separation condition on given pmfs")
    condition.add_argument("--typical", action="append", required=True, help="typical pmf (repeatable)")
    condition.add_argument("--outlier", action="append", required=True, help="outlier pmf (repeatable)")
    condition.add_argument("--json", action="store_true", help="machine-readable output")
    condition.set_defaults(func=cmd_cluster_condition)

    lemma2 = asub.add_parser("lemma2", help="grid-check the variational identity min D(q||p1)+D(q||p2) = 2B")
    lemma2.add_argument("--p1", required=True, help="first pmf")
    lemma2.add_argument("--p2", required=True, help="second pmf")
    lemma2.add_argument("--step", type=float, default=0.01, help="grid step (default 0.01)")
    lemma2.add_argument("--json", action="store_true", help="machine-readable output")
    lemma2.set_defaults(func=cmd_lemma2)

    example1 = asub.add_parser("example1", help="evaluate the built-in hard instance for the unknown-count test")
    example1.add_argument("--m", type=int, default=1000, help="total number of sequences (default 1000)")
    example1.add_argument("--json", action="store_true", help="machine-readable output")
    example1.set_defaults(func=cmd_example1)

    exponent = asub.add_parser("exponent", help="grid-estimate an error exponent over a named constraint set")
    exponent.add_argument("--set", required=True, type=str.upper, choices=EXPONENT_SET_NAMES, help="constraint set")
    exponent.add_argument("--pi", action="append", help="typical pmf (repeatable where the set needs two)")
    exponent.add_argument("--mu", action="append", help="outlier pmf (repeatable where the set needs two)")
    exponent.add_argument("--step", type=float, help="grid step (default 1/200 for 3 variables, 1/64 for 4)")
    exponent.add_argument("--json", action="store_true", help="machine-readable output")
    exponent.set_defaults(func=cmd_exponent)

    bhatta = asub.add_parser("bhatta-bound", help="exponent ceiling min_i 2B(outlier_i, typical)")
    bhatta.add_argument("--typical", required=True, help="typical pmf")
    bhatta.add_argument("--outlier", action="append", required=True, help="outlier pmf (repeatable)")
    bhatta.add_argument("--json", action="store_true", help="machine-readable output")
    bhatta.set_defaults(func=cmd_bhatta_bound)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "detect":
        needs_t = args.test in TESTS_NEEDING_T
        if needs_t and args.t is None:
            parser.error(f"--test {args.test} requires --t")
        if not needs_t and args.t is not None:
            parser.error(f"--t is only meaningful for {', '.join(sorted(TESTS_NEEDING_T))}")
    try:
        return args.func(args)
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
