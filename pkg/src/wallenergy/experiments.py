"""Gamma-convergence pipeline for the second-order functional on an interval.

For each eps the pipeline minimizes F_eps directly (optionally with endpoint
values pinned), reads off the limiting +-1 step pattern, assembles the
rescaled-optimal-profile recovery sequence for that pattern and compares both
energies with the predicted limit

    alpha * essVar(u) + beta(-a0 sgn u(a+)) + beta(-b0 sgn u(b-)).
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .constants import ConstantsConfig, beta_psi_min, compute_alpha
from .energy import _fields, f_eps, integrals
from .optimize import NumericalFailure, OptimizerConfig, OptResult, _ramp, multistart
from .profile import BoundarySpec, Grid, HermiteProfile, evaluate, to_csv

log = logging.getLogger(__name__)


class LayersOverlapError(ValueError):
    """Recovery layers do not fit disjointly inside the domain."""


@dataclass(frozen=True)
class StepLimit:
    domain: tuple
    start_sign: int
    jumps: tuple = ()

    def __post_init__(self):
        a, b = self.domain
        if self.start_sign not in (-1, 1):
            raise ValueError("start_sign must be +1 or -1")
        j = tuple(float(x) for x in self.jumps)
        if any(not a < x < b for x in j) or any(x >= y for x, y in zip(j, j[1:])):
            raise ValueError("jumps must be strictly increasing interior points")
        object.__setattr__(self, "jumps", j)

    @property
    def end_sign(self) -> int:
        return self.start_sign * (-1) ** len(self.jumps)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        n = np.searchsorted(np.asarray(self.jumps), x, side="right")
        return self.start_sign * (-1.0) ** n


def ess_var(u: StepLimit) -> float:
    return 2.0 * len(u.jumps)


def boundary_arguments(u: StepLimit, a0: float, b0: float) -> tuple:
    """beta arguments (-a0 sgn u(a+), -b0 sgn u(b-))."""
    return -a0 * u.start_sign, -b0 * u.end_sign


def predicted_limit(u: StepLimit, a0: float, b0: float, alpha: float,
                    beta_fn: Callable[[float], float], beta_factor: float = 1.0) -> float:
    """Gamma-limit value at ``u``; ``beta_factor=2`` gives the doubled-endpoint variant."""
    ta, tb = boundary_arguments(u, a0, b0)
    return alpha * ess_var(u) + beta_factor * (beta_fn(ta) + beta_fn(tb))


# --- resolution and starts ------------------------------------------------------

def cells_for(eps: float, domain, cells_per_layer: int, refine_exponent: float = 0.0,
              eps_ref: float = 0.2) -> int:
    """Even cell count giving cells_per_layer * (eps_ref/eps)^refine_exponent cells per eps."""
    a, b = domain
    per_eps = cells_per_layer * max(1.0, (eps_ref / eps) ** refine_exponent)
    n = int(math.ceil(per_eps * (b - a) / eps - 1e-9))
    return max(64, n + (n % 2))


def sketch(grid: Grid, u: StepLimit, width: float, left=None, right=None) -> HermiteProfile:
    """C1 step-like start: smooth ramps of ``width`` at the jumps and to the end values."""
    x = grid.nodes
    vals = np.full_like(x, float(u.start_sign))
    ders = np.zeros_like(x)
    sign = u.start_sign
    for xj in u.jumps:
        r = _ramp(grid, 0.0, -2.0 * sign, xj - width / 2, xj + width / 2)
        vals += r.values
        ders += r.derivs
        sign = -sign
    a, b = u.domain
    for target, inner, lo, hi in ((left, u.start_sign, a, a + width),
                                  (right, u.end_sign, b - width, b)):
        if target is None or target == inner:
            continue
        if lo == a:
            r = _ramp(grid, target - inner, 0.0, lo, hi)
        else:
            r = _ramp(grid, 0.0, target - inner, lo, hi)
        vals += r.values
        ders += r.derivs
    return HermiteProfile(grid, vals, ders)


def _patterns(domain) -> list:
    a, b = domain
    L = b - a
    return [StepLimit(domain, -1), StepLimit(domain, 1),
            StepLimit(domain, -1, (a + L / 2,)), StepLimit(domain, 1, (a + L / 2,)),
            StepLimit(domain, -1, (a + L / 3, a + 2 * L / 3))]


def minimize_F(eps: float, domain=(0.0, 1.0), cfg: OptimizerConfig = OptimizerConfig(),
               n_cells: Optional[int] = None, odd: bool = False) -> OptResult:
    """Minimize F_eps with no constraints.

    ``odd=True`` is the diagnostic mode: u(a) = -1, u(b) = 1 and u = 0 at the
    midpoint, which forces one interior transition.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    n = n_cells or cells_for(eps, domain, 32)
    n += n % 2
    grid = Grid(domain[0], domain[1], n)
    w = 4 * eps
    if odd:
        bc = BoundarySpec(-1.0, None, 1.0, None, interior_values=((n // 2, 0.0),))
        inits = [bc.apply(sketch(grid, StepLimit(domain, -1, (0.5 * (domain[0] + domain[1]),)), w))]
        return multistart("f_eps", {"eps": eps}, bc, inits, replace(cfg, multistart_count=1))
    bc = BoundarySpec()
    inits = [sketch(grid, u, w) for u in _patterns(domain)]
    return multistart("f_eps", {"eps": eps}, bc, inits, replace(cfg, multistart_count=len(inits)))


@dataclass
class ExperimentSpec:
    domain: tuple = (0.0, 1.0)
    epsilons: tuple = (0.2, 0.1, 0.05, 0.025)
    a0: float = -1.0
    b0: float = 1.0
    a_rule: Optional[str] = None   # "const:<v>" or "approach:<v0>,<rate>" (v0 + rate * eps)
    b_rule: Optional[str] = None
    cells_per_layer: int = 32
    refine_exponent: float = 0.5   # cells per eps grow like (refine_from / eps)^refine_exponent
    refine_from: float = 0.2
    p_norm: float = 2.0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    # prediction constants: a finer and longer half-line than any direct solve needs
    constants: ConstantsConfig = field(
        default_factory=lambda: ConstantsConfig(cells_per_unit=256, l_max=24.0))
    workers: int = 1
    dump_dir: Optional[str] = None

    def __post_init__(self):
        e = list(self.epsilons)
        if not e or any(x <= 0 for x in e) or any(x <= y for x, y in zip(e, e[1:])):
            raise ValueError("epsilons must be positive and strictly decreasing")
        if not 1 <= self.p_norm <= 4:
            raise ValueError("p must lie in [1, 4]")
        self.a_rule = self.a_rule or f"const:{self.a0}"
        self.b_rule = self.b_rule or f"const:{self.b0}"
        for rule, lim in ((self.a_rule, self.a0), (self.b_rule, self.b0)):
            if not math.isclose(parse_rule(rule)(0.0), lim, abs_tol=1e-12):
                raise ValueError(f"boundary rule {rule!r} does not tend to {lim}")

    def a_eps(self, eps: float) -> float:
        return parse_rule(self.a_rule)(eps)

    def b_eps(self, eps: float) -> float:
        return parse_rule(self.b_rule)(eps)

    def n_cells(self, eps: float) -> int:
        return cells_for(eps, self.domain, self.cells_per_layer, self.refine_exponent,
                         self.refine_from)


def parse_rule(rule: str) -> Callable[[float], float]:
    kind, _, arg = rule.partition(":")
    if kind == "const":
        v = float(arg)
        return lambda eps: v
    if kind == "approach":
        v0, rate = (float(s) for s in arg.split(","))
        return lambda eps: v0 + rate * eps
    raise ValueError(f"unknown boundary rule {rule!r}")


def minimize_G(eps: float, spec: ExperimentSpec, extra_inits: Sequence[HermiteProfile] = ()) -> OptResult:
    """F_eps with the endpoint values pinned to (a_eps, b_eps); endpoint slopes free."""
    grid = Grid(spec.domain[0], spec.domain[1], spec.n_cells(eps))
    av, bv = spec.a_eps(eps), spec.b_eps(eps)
    bc = BoundarySpec(av, None, bv, None)
    w = 4 * eps
    inits = [bc.apply(sketch(grid, u, w, av, bv)) for u in _patterns(spec.domain)]
    inits += [bc.apply(p) for p in extra_inits]
    return multistart("f_eps", {"eps": eps}, bc, inits,
                      replace(spec.optimizer, multistart_count=len(inits)))


# --- limit inference and recovery ----------------------------------------------

def layer_width(eps: float, h: HermiteProfile) -> float:
    """zeta = eps (3 C(h) / P(h))^(1/4): the AM-GM balancing width for profile h."""
    v = integrals(h)
    return eps * (3.0 * v["C"] / v["P"]) ** 0.25


def infer_step_limit(p: HermiteProfile, min_run: float) -> StepLimit:
    """Sign pattern at cell midpoints, dropping runs shorter than ``min_run``."""
    g = p.grid
    xm = g.midpoints()
    um = evaluate(p, xm, 0)
    signs = np.sign(um)
    for i in range(len(signs)):
        if signs[i] == 0:
            signs[i] = signs[i - 1] if i > 0 else 1.0
    if signs[0] == 0:
        signs[:] = 1.0
    # runs as [sign, start index, stop index)
    runs = []
    start = 0
    for i in range(1, len(signs) + 1):
        if i == len(signs) or signs[i] != signs[start]:
            runs.append([signs[start], start, i])
            start = i
    length = lambda r: (r[2] - r[1]) * g.h  # noqa: E731
    while len(runs) > 1:
        k = min(range(len(runs)), key=lambda i: (length(runs[i]), i))
        if length(runs[k]) >= min_run:
            break
        # absorb the short run into its neighbours, merging equal-sign neighbours
        lo = runs[k - 1] if k > 0 else None
        hi = runs[k + 1] if k + 1 < len(runs) else None
        if lo is not None and hi is not None:
            lo[2] = hi[2]
            del runs[k:k + 2]
        elif lo is not None:
            lo[2] = runs[k][2]
            del runs[k]
        else:
            hi[1] = runs[k][1]
            del runs[k]
    jumps = []
    for left, right in zip(runs, runs[1:]):
        i, j = left[2] - 1, right[1]
        x0, x1, u0, u1 = xm[i], xm[j], um[i], um[j]
        jumps.append(x0 + (x1 - x0) * u0 / (u0 - u1) if u0 != u1 else 0.5 * (x0 + x1))
    return StepLimit((g.x_lo, g.x_hi), int(runs[0][0]), tuple(jumps))


def boundary_profile(t: float, eps: float, natural_h: float, opt: OptimizerConfig) -> OptResult:
    """Half-line minimizer for beta_eps(t): support length at most min(12, 1/sqrt(eps))."""
    l_cap = min(12.0, 1.0 / math.sqrt(eps))
    n = max(8, int(math.floor(l_cap / natural_h + 1e-9)))
    return beta_psi_min(t, n * natural_h, 1.0 / natural_h, opt)


def recovery_profile(u: StepLimit, eps: float, h: Optional[HermiteProfile],
                     left_layer: Optional[HermiteProfile], right_layer: Optional[HermiteProfile],
                     grid: Grid, a_eps: float, b_eps: float) -> HermiteProfile:
    """Assemble the recovery profile on ``grid``.

    ``h`` is a unit-interval profile from -1 to 1 with flat ends, placed at each
    jump with width zeta; the layers are half-line profiles on (-L, 0) from -1
    to the boundary argument, mapped by x -> (x - b)/eps (mirrored at a).
    """
    a, b = u.domain
    x = grid.nodes
    vals = np.asarray(u(x), dtype=float).copy()
    ders = np.zeros_like(x)
    # recovery switches sign exactly at the jump; nodal data inside the layers is overwritten
    intervals = []
    if left_layer is not None and u.start_sign * a_eps != 1.0:
        La = -left_layer.grid.x_lo
        intervals.append(("left boundary layer", a, a + eps * La))
    if right_layer is not None and u.end_sign * b_eps != 1.0:
        Lb = -right_layer.grid.x_lo
        intervals.append(("right boundary layer", b - eps * Lb, b))
    zeta = layer_width(eps, h) if (u.jumps and h is not None) else 0.0
    for i, xj in enumerate(u.jumps):
        intervals.append((f"jump {i} at {xj:.6g}", xj - zeta / 2, xj + zeta / 2))
    intervals.sort(key=lambda r: r[1])
    for (n0, lo0, hi0), (n1, lo1, hi1) in zip(intervals, intervals[1:]):
        if hi0 > lo1:
            raise LayersOverlapError(f"{n0} [{lo0:.6g}, {hi0:.6g}] overlaps {n1} [{lo1:.6g}, {hi1:.6g}]")
    for name, lo, hi in intervals:
        if lo < a - 1e-12 or hi > b + 1e-12:
            raise LayersOverlapError(f"{name} [{lo:.6g}, {hi:.6g}] leaves the domain ({a}, {b})")
    sign = u.start_sign
    for xj in u.jumps:
        inside = (x > xj - zeta / 2) & (x < xj + zeta / 2)
        y = (x[inside] - xj + zeta / 2) / zeta
        # h rises from -1 to 1; a downward jump uses -h
        s = -sign
        vals[inside] = s * evaluate(h, y, 0)
        ders[inside] = s * evaluate(h, y, 1) / zeta
        sign = -sign
    if any(n == "right boundary layer" for n, _, _ in intervals):
        lo = b - eps * (-right_layer.grid.x_lo)
        inside = x >= lo
        z = np.clip((x[inside] - b) / eps, right_layer.grid.x_lo, 0.0)
        s = -u.end_sign
        vals[inside] = s * evaluate(right_layer, z, 0)
        ders[inside] = s * evaluate(right_layer, z, 1) / eps
    else:
        vals[-1], ders[-1] = b_eps, 0.0
    if any(n == "left boundary layer" for n, _, _ in intervals):
        hi = a + eps * (-left_layer.grid.x_lo)
        inside = x <= hi
        z = np.clip((a - x[inside]) / eps, left_layer.grid.x_lo, 0.0)
        s = -u.start_sign
        vals[inside] = s * evaluate(left_layer, z, 0)
        ders[inside] = -s * evaluate(left_layer, z, 1) / eps
    else:
        vals[0], ders[0] = a_eps, 0.0
    return HermiteProfile(grid, vals, ders)


def offwell_measure(p: HermiteProfile, threshold: float = 0.1) -> float:
    """Lebesgue measure of {x : ||u(x)| - 1| > threshold} (Gauss-point sampling)."""
    u, _, _, wh = _fields(p)
    return float(np.sum(wh * (np.abs(np.abs(u) - 1.0) > threshold)))


def lp_distance(p: HermiteProfile, u: StepLimit, power: float = 2.0, points: int = 32) -> float:
    g = p.grid
    s, w = np.polynomial.legendre.leggauss(points)
    edges = g.nodes
    x = (0.5 * g.h * s[None, :] + 0.5 * (edges[:-1, None] + edges[1:, None]))
    diff = np.abs(evaluate(p, x, 0) - u(x)) ** power
    return float(np.sum(0.5 * g.h * w * diff) ** (1.0 / power))


# --- the study ------------------------------------------------------------------

@dataclass
class ConvergenceRecord:
    eps: float
    direct_min: float = math.nan
    recovery_energy: float = math.nan
    predicted: float = math.nan
    predicted_alt: float = math.nan
    rel_gap: float = math.nan
    rel_gap_alt: float = math.nan
    offwell_measure: float = math.nan
    inferred: Optional[StepLimit] = None
    n_cells: int = 0
    lp_distance: float = math.nan
    converged: bool = False
    error: str = ""
    direct_profile: Optional[HermiteProfile] = field(default=None, repr=False)
    recovery: Optional[HermiteProfile] = field(default=None, repr=False)

    @property
    def inferred_jumps(self) -> str:
        return "" if self.inferred is None else ";".join(f"{x:.6g}" for x in self.inferred.jumps)

    @property
    def matching_normalization(self) -> str:
        """Which endpoint normalization (beta or 2 beta) the direct minimum sits closer to."""
        if math.isnan(self.rel_gap) or self.predicted == self.predicted_alt:
            return "indistinguishable"
        return "beta" if self.rel_gap <= self.rel_gap_alt else "2beta"


class _BetaCache:
    def __init__(self, cfg: ConstantsConfig):
        self.cfg = cfg
        self.values = {-1.0: 0.0}

    def __call__(self, t: float) -> float:
        t = float(t)
        if t not in self.values:
            r = beta_psi_min(t, self.cfg.l_max, self.cfg.cells_per_unit, self.cfg.optimizer)
            self.values[t] = r.energy
        return self.values[t]


@dataclass
class StudyContext:
    alpha: float
    h: HermiteProfile
    beta: Callable[[float], float]


def study_context(spec: ExperimentSpec) -> StudyContext:
    a = compute_alpha(spec.constants)
    return StudyContext(a.value, a.minimizer, _BetaCache(spec.constants))


def _study_one(eps: float, spec: ExperimentSpec, ctx: StudyContext) -> ConvergenceRecord:
    rec = ConvergenceRecord(eps, n_cells=spec.n_cells(eps))
    av, bv = spec.a_eps(eps), spec.b_eps(eps)
    try:
        res = minimize_G(eps, spec)
        zeta = layer_width(eps, ctx.h)
        u = infer_step_limit(res.profile, zeta / 2)
        natural_h = (spec.domain[1] - spec.domain[0]) / (rec.n_cells * eps)
        ta, tb = -av * u.start_sign, -bv * u.end_sign
        left = boundary_profile(ta, eps, natural_h, spec.optimizer).profile
        right = boundary_profile(tb, eps, natural_h, spec.optimizer).profile
        rec.inferred = u
        rec.predicted = predicted_limit(u, spec.a0, spec.b0, ctx.alpha, ctx.beta)
        rec.predicted_alt = predicted_limit(u, spec.a0, spec.b0, ctx.alpha, ctx.beta, 2.0)
        try:
            rec.recovery = recovery_profile(u, eps, ctx.h, left, right, res.profile.grid, av, bv)
            rec.recovery_energy = f_eps(rec.recovery, eps)
            rec.lp_distance = lp_distance(rec.recovery, u, spec.p_norm)
            if rec.recovery_energy < res.energy:
                # recovery is admissible; polish from it so the direct minimum never exceeds it
                res2 = minimize_G(eps, spec, extra_inits=[rec.recovery])
                if res2.energy < res.energy:
                    res = res2
        except LayersOverlapError as exc:
            rec.error = str(exc)
        rec.direct_min = res.energy
        rec.direct_profile = res.profile
        rec.converged = res.converged
        rec.offwell_measure = offwell_measure(res.profile)
        scale = max(rec.predicted, 1e-12)
        rec.rel_gap = abs(rec.direct_min - rec.predicted) / scale
        rec.rel_gap_alt = abs(rec.direct_min - rec.predicted_alt) / max(rec.predicted_alt, 1e-12)
    except NumericalFailure as exc:
        rec.error = f"numerical failure: {exc}"
    if spec.dump_dir and rec.direct_profile is not None:
        d = Path(spec.dump_dir)
        d.mkdir(parents=True, exist_ok=True)
        to_csv(rec.direct_profile, d / f"direct_eps{eps:g}.csv")
        if rec.recovery is not None:
            to_csv(rec.recovery, d / f"recovery_eps{eps:g}.csv")
    return rec


def _study_one_packed(args):
    return _study_one(*args)


def convergence_study(spec: ExperimentSpec, ctx: Optional[StudyContext] = None) -> list:
    ctx = ctx or study_context(spec)
    # warm the beta cache for every argument a sign pattern can produce
    for eps in spec.epsilons:
        for v in (spec.a0, spec.b0):
            ctx.beta(v), ctx.beta(-v)
    jobs = [(eps, spec, ctx) for eps in spec.epsilons]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            records = list(pool.map(_study_one_packed, jobs))
    else:
        records = [_study_one(*j) for j in jobs]
    return sorted(records, key=lambda r: -r.eps)


STUDY_CSV_HEADER = ("eps", "direct_min", "recovery_energy", "predicted", "predicted_alt",
                    "rel_gap", "offwell_measure", "inferred_jumps")


def study_csv(records, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STUDY_CSV_HEADER)
    for r in records:
        w.writerow([repr(r.eps), repr(r.direct_min), repr(r.recovery_energy), repr(r.predicted),
                    repr(r.predicted_alt), repr(r.rel_gap), repr(r.offwell_measure), r.inferred_jumps])
    return buf.getvalue()


def normalization_verdict(records) -> str:
    """Majority verdict over the records that can tell the normalizations apart."""
    votes = [r.matching_normalization for r in records if r.matching_normalization != "indistinguishable"]
    if not votes:
        return "indistinguishable"
    return max(("beta", "2beta"), key=votes.count)
