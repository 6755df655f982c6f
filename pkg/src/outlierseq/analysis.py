"""Verification toolkit for the divergence identities behind the detectors.

Four independent pieces:

* :func:`check_cluster_condition` decides the separation condition the
  clustering tests rely on (every within-group divergence strictly below
  every cross-group divergence, both orientations) and reports witnesses.
* :func:`example1_certificate` evaluates the built-in hard instance on
  which the exhaustive unknown-count test provably fails: a uniform decoy
  typical makes the enlarged set S' = {0,1,2} score no worse than the
  true outlier pair, even at the true distributions.
* :func:`lemma2_oracle` grid-minimizes D(q||p1) + D(q||p2); the minimum
  is 2B(p1, p2), attained at the normalized geometric mean, so the grid
  sweep doubles as a check of that closed form.
* :func:`estimate_exponent` brute-forces the Sanov-style error exponents:
  minimize a sum of divergences-to-targets over grid points of the binary
  simplex subject to pairwise divergence inequalities.  The named
  constraint sets C1..C10 are provided by :func:`exponent_problem`.

Grid conventions (shared by the oracles): axis points are the multiples
of the step, with 1.0 appended when the step does not divide 1 exactly;
argmin ties break to the lexicographically smallest grid coordinates;
strict inequalities are relaxed to non-strict on the grid, where the
distinction is below resolution anyway.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import inf, isinf

import numpy as np

from .gl import GlCostBreakdown, OutlierSet, gl_cost_unknown
from .pmf import Alphabet, Pmf, bhattacharyya, pmf_matrix

__all__ = [
    "ClusterConditionCheck",
    "DivergenceConstraint",
    "Example1Certificate",
    "ExponentEstimate",
    "ExponentProblem",
    "EXPONENT_SET_NAMES",
    "bhattacharyya_bound",
    "check_cluster_condition",
    "estimate_exponent",
    "example1_certificate",
    "exponent_problem",
    "lemma2_closed_form",
    "lemma2_oracle",
]


def _pairwise_kl(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """D(a_r || b_s) for every row pair, with the extended-value conventions."""
    la = np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), 0.0)
    lb = np.where(b > 0, np.log(np.where(b > 0, b, 1.0)), 0.0)
    d = (a[:, None, :] * (la[:, None, :] - lb[None, :, :])).sum(axis=2)
    undefined = ((a[:, None, :] > 0) & (b[None, :, :] == 0.0)).any(axis=2)
    d[undefined] = inf
    # bitwise-equal rows have divergence exactly 0; don't let summation order blur that
    d[(a[:, None, :] == b[None, :, :]).all(axis=2)] = 0.0
    return np.maximum(d, 0.0)


@dataclass(frozen=True)
class ClusterConditionCheck:
    """Verdict on the separation condition, with extremal witnesses.

    The condition holds when the largest within-typical and
    within-outlier divergences are each strictly below the smallest
    cross divergence (minimum over both orientations).  Pairs are
    reported as indices into the lists passed in; cross pairs are always
    (typical index, outlier index) with the orientation spelled out.
    """

    holds: bool
    max_intra_typical: float
    max_intra_typical_pair: tuple[int, int] | None
    max_intra_outlier: float
    max_intra_outlier_pair: tuple[int, int] | None
    min_cross: float
    min_cross_pair: tuple[int, int]
    min_cross_orientation: str

    def __bool__(self) -> bool:
        return self.holds

    @property
    def max_intra(self) -> float:
        return max(self.max_intra_typical, self.max_intra_outlier)

    def describe(self) -> str:
        lines = [
            f"cluster condition: {'holds' if self.holds else 'VIOLATED'}",
            f"  max intra-typical KL: {self.max_intra_typical:.6g} at pair {self.max_intra_typical_pair}",
            f"  max intra-outlier KL: {self.max_intra_outlier:.6g} at pair {self.max_intra_outlier_pair}",
            f"  min cross KL:         {self.min_cross:.6g} as {self.min_cross_orientation}"
            f" at (typical, outlier) = {self.min_cross_pair}",
        ]
        if not self.holds:
            side = "typical" if self.max_intra_typical >= self.max_intra_outlier else "outlier"
            lines.append(f"  violation: intra-{side} maximum is not strictly below the cross minimum")
        return "\n".join(lines)


def _intra_max(d: np.ndarray) -> tuple[float, tuple[int, int] | None]:
    if d.shape[0] < 2:
        return 0.0, None
    masked = d.copy()
    np.fill_diagonal(masked, -inf)
    flat = int(np.argmax(masked))
    pair = (flat // d.shape[1], flat % d.shape[1])
    return float(masked[pair]), pair


def check_cluster_condition(typicals, outliers) -> ClusterConditionCheck:
    """Check strict separation between the typical and outlier families.

    Both arguments are nonempty lists of distributions on one alphabet.
    A family with a single member contributes an intra maximum of 0.
    """
    typicals = list(typicals)
    outliers = list(outliers)
    if not typicals or not outliers:
        raise ValueError("both families must be nonempty")
    mat_t = pmf_matrix(typicals + outliers)
    mat_o = mat_t[len(typicals):]
    mat_t = mat_t[: len(typicals)]
    max_t, pair_t = _intra_max(_pairwise_kl(mat_t, mat_t))
    max_o, pair_o = _intra_max(_pairwise_kl(mat_o, mat_o))
    d_to = _pairwise_kl(mat_t, mat_o)
    d_ot = _pairwise_kl(mat_o, mat_t)
    flat_to = int(np.argmin(d_to))
    flat_ot = int(np.argmin(d_ot))
    val_to = float(d_to.flat[flat_to])
    val_ot = float(d_ot.flat[flat_ot])
    if val_to <= val_ot:
        min_cross = val_to
        pair = (flat_to // d_to.shape[1], flat_to % d_to.shape[1])
        orientation = "D(typical||outlier)"
    else:
        min_cross = val_ot
        out_idx, typ_idx = flat_ot // d_ot.shape[1], flat_ot % d_ot.shape[1]
        pair = (typ_idx, out_idx)
        orientation = "D(outlier||typical)"
    holds = max_t < min_cross and max_o < min_cross
    return ClusterConditionCheck(holds, max_t, pair_t, max_o, pair_o, min_cross, pair, orientation)


_EXAMPLE1_OUTLIER_1 = (Fraction(1, 4), Fraction(1, 2), Fraction(1, 4))
_EXAMPLE1_OUTLIER_2 = (Fraction(1, 5), Fraction(7, 15), Fraction(1, 3))
_EXAMPLE1_DECOY = (Fraction(1, 3), Fraction(1, 3), Fraction(1, 3))
_EXAMPLE1_TYPICAL = (Fraction(247, 500), Fraction(32, 125), Fraction(1, 4))


def _exact(fractions: tuple[Fraction, ...]) -> Pmf:
    return Pmf(np.array([float(f) for f in fractions]))


@dataclass(frozen=True)
class Example1Certificate:
    """Two-part certificate that the unknown-count exhaustive test can fail.

    Part (a): the instance satisfies the cluster separation condition, so
    clustering-based tests are not excused.  Part (b): at the true
    distributions the unknown-count objective at the enlarged set
    ``set_confused`` is no larger than at the true set ``set_true``, so
    the exhaustive minimization cannot consistently prefer the truth.
    """

    m: int
    condition: ClusterConditionCheck
    set_true: OutlierSet
    set_confused: OutlierSet
    cost_true: GlCostBreakdown
    cost_confused: GlCostBreakdown

    @property
    def gl_prefers_confused(self) -> bool:
        return self.cost_confused.total <= self.cost_true.total

    @property
    def margin(self) -> float:
        """How much cheaper the confused set is; >= 0 when part (b) holds."""
        return self.cost_true.total - self.cost_confused.total

    @property
    def holds(self) -> bool:
        return self.condition.holds and self.gl_prefers_confused

    def __bool__(self) -> bool:
        return self.holds

    def describe(self) -> str:
        return "\n".join(
            [
                f"hard instance, M = {self.m}",
                "(a) " + self.condition.describe(),
                f"(b) total cost at confused set {sorted(self.set_confused)}: {self.cost_confused.total:.6f}",
                f"    total cost at true set     {sorted(self.set_true)}: {self.cost_true.total:.6f}",
                f"    margin (true - confused): {self.margin:.6f}"
                f" -> exhaustive test {'prefers the confused set' if self.gl_prefers_confused else 'prefers the truth'}",
                f"certificate {'holds' if self.holds else 'FAILS'}",
            ]
        )


def example1_certificate(m: int = 1000, pi3: Pmf | None = None) -> Example1Certificate:
    """Evaluate the built-in hard instance for the unknown-count test.

    Sequences 0 and 1 are outlying (two distinct trimodal distributions),
    sequence 2 is a uniform decoy, and the remaining m - 3 share one
    typical distribution.  ``pi3`` replaces the decoy to probe how the
    certificate depends on it.  All constants are exact rationals
    converted to floats once, here.
    """
    if m < 7:
        raise ValueError("need m >= 7 so that the confused set is a strict minority")
    mu1 = _exact(_EXAMPLE1_OUTLIER_1)
    mu2 = _exact(_EXAMPLE1_OUTLIER_2)
    decoy = pi3 if pi3 is not None else _exact(_EXAMPLE1_DECOY)
    typical = _exact(_EXAMPLE1_TYPICAL)
    condition = check_cluster_condition([decoy, typical], [mu1, mu2])
    pmfs = [mu1, mu2, decoy] + [typical] * (m - 3)
    set_true = OutlierSet((0, 1), m)
    set_confused = OutlierSet((0, 1, 2), m)
    return Example1Certificate(
        m=m,
        condition=condition,
        set_true=set_true,
        set_confused=set_confused,
        cost_true=gl_cost_unknown(pmfs, set_true),
        cost_confused=gl_cost_unknown(pmfs, set_confused),
    )


def _grid_axis(step: float) -> np.ndarray:
    if not 0.0 < step <= 0.5:
        raise ValueError(f"grid step must lie in (0, 0.5], got {step}")
    count = int(np.floor(1.0 / step + 1e-9)) + 1
    axis = np.minimum(np.arange(count, dtype=np.float64) * step, 1.0)
    if axis[-1] < 1.0:
        axis = np.append(axis, 1.0)
    return axis


def _binary_kl_curve(x: np.ndarray, p0: float, p1: float) -> np.ndarray:
    """D((x, 1-x) || (p0, p1)) along the axis, extended conventions included.

    Clamped at 0: rounding can push the divergence of 1-ulp-apart points
    a hair negative, which the true quantity never is.
    """
    out = np.zeros_like(x)
    for mass, target in ((x, p0), (1.0 - x, p1)):
        pos = mass > 0
        if target == 0.0:
            out = out + np.where(pos, inf, 0.0)
        else:
            safe = np.where(pos, mass, 1.0)
            out = out + np.where(pos, safe * (np.log(safe) - np.log(target)), 0.0)
    return np.maximum(out, 0.0)


def lemma2_closed_form(p1: Pmf, p2: Pmf) -> tuple[float, Pmf]:
    """The exact minimum 2B(p1, p2) and its minimizer, the normalized geometric mean."""
    root = np.sqrt(p1.probs * p2.probs)
    total = root.sum()
    if total <= 0.0:
        raise ValueError("distributions with disjoint support have no finite minimum")
    return 2.0 * bhattacharyya(p1, p2), Pmf(root / total, p1.alphabet)


def lemma2_oracle(p1: Pmf, p2: Pmf, grid_step: float = 0.01) -> tuple[float, Pmf]:
    """Grid-minimize q -> D(q||p1) + D(q||p2) over the simplex.

    Supports alphabet sizes 2 and 3 (one and two free coordinates).  Both
    inputs must have full support so the objective is finite everywhere.
    The returned minimum is within O(step) of 2B(p1, p2) and the argmin
    within O(step) total variation of the normalized geometric mean.
    """
    if len(p1) != len(p2) or p1.alphabet != p2.alphabet:
        raise ValueError("p1 and p2 must share an alphabet")
    if len(p1) not in (2, 3):
        raise ValueError("grid oracle supports alphabet sizes 2 and 3 only")
    if not (p1.full_support() and p2.full_support()):
        raise ValueError("p1 and p2 must have full support")
    if grid_step > 0.01:
        raise ValueError("grid_step above 0.01 is too coarse for the oracle's guarantees")
    axis = _grid_axis(grid_step)
    a1, a2 = p1.probs, p2.probs
    if len(p1) == 2:
        values = _binary_kl_curve(axis, a1[0], a1[1]) + _binary_kl_curve(axis, a2[0], a2[1])
        best = int(np.argmin(values))
        q = Pmf(np.array([axis[best], 1.0 - axis[best]]), p1.alphabet)
        return float(values[best]), q
    x = axis[:, None]
    y = axis[None, :]
    z = np.maximum(1.0 - x - y, 0.0)
    valid = x + y <= 1.0 + 1e-12
    total = np.zeros(valid.shape)
    for target in (a1, a2):
        for mass, t in ((np.broadcast_to(x, valid.shape), target[0]),
                        (np.broadcast_to(y, valid.shape), target[1]),
                        (z, target[2])):
            pos = mass > 0
            safe = np.where(pos, mass, 1.0)
            total = total + np.where(pos, safe * (np.log(safe) - np.log(t)), 0.0)
    total[~valid] = inf
    flat = int(np.argmin(total))  # first minimum in row-major order: lexicographic (x, y)
    i, j = flat // total.shape[1], flat % total.shape[1]
    q = Pmf(np.array([axis[i], axis[j], max(1.0 - axis[i] - axis[j], 0.0)]), p1.alphabet)
    return float(total[i, j]), q


@dataclass(frozen=True)
class DivergenceConstraint:
    """One inequality D(q_a || q_b) REL D(q_c || q_d) between optimization variables.

    Indices are 0-based positions into the problem's variable list; REL
    is < when ``strict`` else <=.  Rewrite > constraints by swapping sides.
    """

    a: int
    b: int
    c: int
    d: int
    strict: bool = True

    def __post_init__(self) -> None:
        for idx in (self.a, self.b, self.c, self.d):
            if not isinstance(idx, int) or idx < 0:
                raise ValueError("constraint indices must be nonnegative ints")

    def __str__(self) -> str:
        rel = "<" if self.strict else "<="
        return f"D(q{self.a}||q{self.b}) {rel} D(q{self.c}||q{self.d})"


@dataclass(frozen=True)
class ExponentProblem:
    """Minimize sum_j D(q_j || target_j) subject to divergence inequalities."""

    targets: tuple[Pmf, ...]
    constraints: tuple[DivergenceConstraint, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        j = len(self.targets)
        if j not in (3, 4):
            raise ValueError(f"problems have 3 or 4 variables, got {j}")
        if any(t.alphabet != self.targets[0].alphabet for t in self.targets):
            raise ValueError("targets must share one alphabet")
        for con in self.constraints:
            if max(con.a, con.b, con.c, con.d) >= j:
                raise ValueError(f"constraint {con} references a variable beyond q{j - 1}")

    @property
    def alphabet(self) -> Alphabet:
        return self.targets[0].alphabet


@dataclass(frozen=True)
class ExponentEstimate:
    """Grid minimum of an exponent problem.

    ``value`` equals the objective re-evaluated at ``minimizer`` (or +inf
    with an empty minimizer when no grid point is feasible).
    ``relaxed_constraints`` counts strict inequalities treated as
    non-strict on the grid.
    """

    value: float
    grid_step: float
    minimizer: tuple[Pmf, ...]
    relaxed_constraints: int = 0

    def __post_init__(self) -> None:
        if not (self.value >= 0.0):
            raise ValueError("exponent estimates are nonnegative")
        if not self.minimizer and not isinf(self.value):
            raise ValueError("an empty minimizer means an infeasible problem, value +inf")

    @property
    def feasible(self) -> bool:
        return bool(self.minimizer)

    def describe(self) -> str:
        if not self.feasible:
            return f"no grid point at step {self.grid_step:.6g} satisfies the constraints: estimate +inf"
        points = ", ".join("(" + ", ".join(f"{v:.6g}" for v in q.probs) + ")" for q in self.minimizer)
        note = (
            f" ({self.relaxed_constraints} strict constraint(s) relaxed to non-strict on the grid)"
            if self.relaxed_constraints
            else ""
        )
        return f"estimate {self.value:.6f} nats at step {self.grid_step:.6g}, minimizer {points}{note}"


# Named constraint sets for the initialization/assignment error events.
# Each entry: variable pattern over the typical (t) and outlier (o) inputs,
# then the inequalities. Pattern "t0" means "measured against the first
# typical distribution"; a repeated tag reuses the same input.
_EXPONENT_SETS: dict[str, tuple[tuple[str, ...], tuple[tuple[int, int, int, int, bool], ...]]] = {
    "C1": (("o0", "t0", "t0"), ((0, 1, 2, 1, False),)),
    "C2": (("t0", "t0", "o0", "o1"), ((0, 2, 3, 2, True), (3, 2, 1, 2, True))),
    "C3": (("t0", "t0", "o0"), ((2, 1, 0, 1, True),)),
    "C4": (("o0", "o0", "t0"), ((2, 1, 0, 1, True),)),
    "C5": (("t0", "t0", "o0"), ((0, 2, 0, 1, True),)),
    "C6": (("o0", "o0", "t0"), ((0, 2, 0, 1, True),)),
    "C7": (("t0", "t1", "o0"), ((2, 1, 0, 1, True),)),
    "C8": (("o0", "o1", "t0"), ((2, 1, 0, 1, True),)),
    "C9": (("t0", "t1", "o0"), ((0, 2, 0, 1, True),)),
    "C10": (("o0", "o1", "t0"), ((0, 2, 0, 1, True),)),
}

EXPONENT_SET_NAMES = tuple(_EXPONENT_SETS)


def exponent_problem(set_name: str, typical, outlier) -> ExponentProblem:
    """Build one of the named problems C1..C10.

    ``typical`` and ``outlier`` are a Pmf or a list of Pmfs; the chosen
    set dictates how many of each are consumed (C7/C9 need two distinct
    typicals, C2/C8/C10 two distinct outliers, the rest one of each).
    """
    name = set_name.upper()
    if name not in _EXPONENT_SETS:
        raise ValueError(f"unknown constraint set {set_name!r}; choose from {', '.join(_EXPONENT_SETS)}")
    typicals = [typical] if isinstance(typical, Pmf) else list(typical)
    outliers = [outlier] if isinstance(outlier, Pmf) else list(outlier)
    pattern, raw = _EXPONENT_SETS[name]
    need_t = 1 + max((int(tag[1:]) for tag in pattern if tag[0] == "t"), default=-1)
    need_o = 1 + max((int(tag[1:]) for tag in pattern if tag[0] == "o"), default=-1)
    if len(typicals) != need_t:
        raise ValueError(f"{name} takes exactly {need_t} typical distribution(s), got {len(typicals)}")
    if len(outliers) != need_o:
        raise ValueError(f"{name} takes exactly {need_o} outlier distribution(s), got {len(outliers)}")
    targets = tuple((typicals if tag[0] == "t" else outliers)[int(tag[1:])] for tag in pattern)
    constraints = tuple(DivergenceConstraint(*entry) for entry in raw)
    return ExponentProblem(targets=targets, constraints=constraints)


def estimate_exponent(problem: ExponentProblem, grid_step: float | None = None) -> ExponentEstimate:
    """Brute-force the problem on a binary-alphabet grid.

    Each variable q_j = (x, 1-x) ranges over the axis; the default step
    is 1/200 for 3 variables and 1/64 for 4.  Strict inequalities are
    relaxed to non-strict (the distinction is invisible at grid
    resolution, and the minimum over the closure is what the exponent
    needs).  Infeasible problems yield +inf with an empty minimizer.
    """
    if problem.alphabet.size != 2:
        raise ValueError("exponent estimation supports only binary alphabets (|Y| = 2)")
    j = len(problem.targets)
    step = grid_step if grid_step is not None else (1.0 / 200.0 if j == 3 else 1.0 / 64.0)
    axis = _grid_axis(step)
    n = axis.shape[0]
    objectives = [_binary_kl_curve(axis, t.probs[0], t.probs[1]) for t in problem.targets]

    table = np.empty((n, n))  # table[i, k] = D((axis[i], .) || (axis[k], .))
    for k in range(n):
        table[:, k] = _binary_kl_curve(axis, axis[k], 1.0 - axis[k])

    def rest_shape(d: int) -> tuple[int, ...]:
        # axis d of the inner sweep (variables q_1..q_{J-1}; q_0 is the outer loop)
        return (1,) * d + (n,) + (1,) * (j - 2 - d)

    rest = objectives[1].reshape(rest_shape(0))
    for d in range(1, j - 1):
        rest = rest + objectives[d + 1].reshape(rest_shape(d))
    grids = [np.arange(n).reshape(rest_shape(d)) for d in range(j - 1)]

    def side(i1: int, var_q: int, var_ref: int) -> np.ndarray:
        iq = i1 if var_q == 0 else grids[var_q - 1]
        ir = i1 if var_ref == 0 else grids[var_ref - 1]
        return table[iq, ir]

    best_value = inf
    best_coords: tuple[int, ...] | None = None
    first_feasible: tuple[int, ...] | None = None
    full_shape = (n,) * (j - 1)
    for i1 in range(n):
        feasible = np.ones(full_shape, dtype=bool)
        for con in problem.constraints:
            feasible &= side(i1, con.a, con.b) <= side(i1, con.c, con.d)
        if not feasible.any():
            continue
        if first_feasible is None:
            flat = int(np.argmax(feasible))
            first_feasible = (i1, *np.unravel_index(flat, full_shape))
        cost = np.where(feasible, objectives[0][i1] + rest, inf)
        flat = int(np.argmin(cost))
        value = float(cost.flat[flat])
        if value < best_value:
            best_value = value
            best_coords = (i1, *np.unravel_index(flat, full_shape))

    relaxed = sum(1 for con in problem.constraints if con.strict)
    coords = best_coords if best_coords is not None else first_feasible
    if coords is None:
        return ExponentEstimate(inf, step, (), relaxed)
    minimizer = tuple(
        Pmf(np.array([axis[i], 1.0 - axis[i]]), problem.alphabet) for i in coords
    )
    # re-evaluate in the sweep's exact association order so value == objective(minimizer)
    acc = objectives[1][coords[1]]
    for v in range(2, j):
        acc = acc + objectives[v][coords[v]]
    value = float(objectives[0][coords[0]] + acc)
    return ExponentEstimate(value, step, minimizer, relaxed)


def bhattacharyya_bound(typical: Pmf, outliers) -> float:
    """min_i 2B(outlier_i, typical): the large-M ceiling on the achievable exponent."""
    outs = [outliers] if isinstance(outliers, Pmf) else list(outliers)
    if not outs:
        raise ValueError("need at least one outlier distribution")
    if any(o.alphabet != typical.alphabet for o in outs):
        raise ValueError("all distributions must share one alphabet")
    return min(2.0 * bhattacharyya(o, typical) for o in outs)
