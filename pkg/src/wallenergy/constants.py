"""Wall-energy constants from constrained profile optimization.

* ``alpha``: interior wall constant, (2 / 3^(3/4)) inf P^(3/4) C^(1/4) over
  unit-interval profiles from -1 to 1 with flat ends.
* ``beta(t)``: boundary-layer cost of reaching the value ``t`` from the -1
  phase.  Computed two independent ways: the scale-free product on (0, 1)
  (right slope free) and the sum P + C on a truncated half-line (-L_max, 0).
* ``c_fm``: whole-line minimal energy of int W(u) + |u''|^2 from -1 to 1.
* ``first_order``: the Modica-Mortola value 2 int_{-1}^{1} sqrt(W) = 8/3.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .energy import AMGM
from .optimize import (NumericalFailure, OptimizerConfig, OptResult, _ramp, boundary_layer,
                       middle_ramp, multistart, smoothstep, tanh_ramp)
from .profile import BoundarySpec, Grid, HermiteProfile, clamped

log = logging.getLogger(__name__)

ALPHA_FACTOR = 2.0 / 3.0**0.75


@dataclass(frozen=True)
class ConstantsConfig:
    n_cells: int = 512            # unit-interval (product) problems
    cells_per_unit: int = 64      # truncated half-line / whole-line problems
    l_max: float = 12.0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    # transition widths (fractions of the unit interval) seeding the product problems;
    # that functional is flat under dilation, so the start fixes the resolved length scale
    phi_widths: tuple = (1 / 6, 1 / 8, 1 / 12)


@dataclass
class Computed:
    """A computed constant with its minimizer; unpacks as ``(value, minimizer)``."""

    value: float
    minimizer: HermiteProfile
    result: Optional[OptResult] = None

    def __iter__(self):
        return iter((self.value, self.minimizer))


@dataclass
class BetaPoint:
    t: float
    beta_phi: float = math.nan
    beta_psi: float = math.nan
    l_max: float = 12.0
    converged: bool = True
    phi_profile: Optional[HermiteProfile] = field(default=None, repr=False)
    psi_profile: Optional[HermiteProfile] = field(default=None, repr=False)
    error: str = ""

    @property
    def route_gap(self) -> float:
        return abs(self.beta_phi - self.beta_psi) / max(self.beta_psi, 1e-12)


@dataclass
class ConstantsReport:
    alpha: float
    c_fm: float
    c_fm_half: float
    first_order: float
    n_cells: int
    l_max: float
    diagnostics: dict = field(default_factory=dict)

    CSV_HEADER = ("n_cells", "alpha", "c_fm", "first_order")

    def csv_row(self) -> list:
        return [self.n_cells, self.alpha, self.c_fm, self.first_order]


def _cells(length: float, per_unit: int) -> int:
    return max(8, int(round(length * per_unit)))


def compute_alpha(cfg: ConstantsConfig = ConstantsConfig()) -> Computed:
    grid = Grid(0.0, 1.0, cfg.n_cells)
    bc = clamped(-1.0, 1.0)
    inits = [middle_ramp(grid, bc)] + [
        bc.apply(_ramp(grid, -1.0, 1.0, 0.5 - w / 2, 0.5 + w / 2)) for w in cfg.phi_widths]
    inits += [smoothstep(grid, bc)]
    opt = replace(cfg.optimizer, multistart_count=max(cfg.optimizer.multistart_count, len(inits)))
    res = multistart("phi", {}, bc, inits, opt)
    return Computed(ALPHA_FACTOR * res.energy, res.profile, res)


def beta_phi_bc(t: float) -> BoundarySpec:
    """Unit-interval class: u(0) = -1, u'(0) = 0, u(1) = t, right slope free."""
    return BoundarySpec(-1.0, 0.0, float(t), None)


def _beta_phi(t: float, cfg: ConstantsConfig, warm: Optional[HermiteProfile]) -> OptResult:
    grid = Grid(0.0, 1.0, cfg.n_cells)
    bc = beta_phi_bc(t)
    inits = [] if warm is None else [bc.apply(warm)]
    inits += [bc.apply(_ramp(grid, -1.0, t, 1.0 - w, 1.0)) for w in cfg.phi_widths]
    if warm is None:
        inits += [smoothstep(grid, bc), middle_ramp(grid, bc), boundary_layer(grid, bc)]
    return multistart("phi", {}, bc, inits, cfg.optimizer)


def half_line_grid(l_max: float, cells_per_unit: int) -> Grid:
    return Grid(-l_max, 0.0, _cells(l_max, cells_per_unit))


def beta_psi_min(t: float, l_max: float, cells_per_unit: int, opt: OptimizerConfig,
                 warm: Optional[HermiteProfile] = None) -> OptResult:
    """Minimize P + C on (-l_max, 0), clamped to the -1 phase on the left, u(0) = t."""
    grid = half_line_grid(l_max, cells_per_unit)
    bc = BoundarySpec(-1.0, 0.0, float(t), None)
    if t == -1.0:
        p = HermiteProfile.constant(grid, -1.0)
        return OptResult(p, 0.0, 0, True, 0.0, [0.0])
    inits = [] if warm is None else [bc.apply(warm)]
    inits += [bc.apply(_ramp(grid, -1.0, t, -min(w, l_max), 0.0)) for w in (4.0, 2.0)]
    if warm is None:
        inits += [smoothstep(grid, bc), middle_ramp(grid, bc)]
    return multistart("psi", {}, bc, inits, opt)


def compute_beta(t: float, route: str = "both", cfg: ConstantsConfig = ConstantsConfig(),
                 warm_phi: Optional[HermiteProfile] = None,
                 warm_psi: Optional[HermiteProfile] = None) -> BetaPoint:
    if route not in ("phi", "psi", "both"):
        raise ValueError(f"route must be phi, psi or both, got {route!r}")
    t = float(t)
    pt = BetaPoint(t, l_max=cfg.l_max)
    if t == -1.0:
        # both infima vanish at the constant profile
        if route in ("phi", "both"):
            pt.beta_phi, pt.phi_profile = 0.0, HermiteProfile.constant(Grid(0, 1, cfg.n_cells), -1.0)
        if route in ("psi", "both"):
            pt.beta_psi = 0.0
            pt.psi_profile = HermiteProfile.constant(half_line_grid(cfg.l_max, cfg.cells_per_unit), -1.0)
        return pt
    if route in ("phi", "both"):
        r = _beta_phi(t, cfg, warm_phi)
        pt.beta_phi, pt.phi_profile = AMGM * r.energy, r.profile
        pt.converged = r.converged
    if route in ("psi", "both"):
        r = beta_psi_min(t, cfg.l_max, cfg.cells_per_unit, cfg.optimizer, warm_psi)
        pt.beta_psi, pt.psi_profile = r.energy, r.profile
        pt.converged = pt.converged and r.converged
    return pt


def whole_line_min(l_max: float, cells_per_unit: int, opt: OptimizerConfig) -> OptResult:
    grid = Grid(-l_max, l_max, _cells(2 * l_max, cells_per_unit))
    bc = clamped(-1.0, 1.0)
    inits = [tanh_ramp(grid, bc, width=1.0), middle_ramp(grid, bc), smoothstep(grid, bc)]
    return multistart("psi", {}, bc, inits, opt)


def compute_fm_constant(cfg: ConstantsConfig = ConstantsConfig(),
                        l_max: Optional[float] = None) -> Computed:
    res = whole_line_min(l_max or cfg.l_max, cfg.cells_per_unit, cfg.optimizer)
    return Computed(res.energy, res.profile, res)


def first_order_constant(cfg: ConstantsConfig = ConstantsConfig(), l_max: float = 10.0,
                         n_cells: int = 1000) -> Computed:
    """Minimize int W(u) + |u'|^2 on (-l_max, l_max) with u(+-l_max) = +-1."""
    grid = Grid(-l_max, l_max, n_cells)
    bc = BoundarySpec(-1.0, None, 1.0, None)
    inits = [tanh_ramp(grid, bc, width=2.0), middle_ramp(grid, bc), smoothstep(grid, bc)]
    res = multistart("first_order", {}, bc, inits, cfg.optimizer)
    return Computed(res.energy, res.profile, res)


def constants_report(cfg: ConstantsConfig = ConstantsConfig()) -> ConstantsReport:
    a = compute_alpha(cfg)
    c = compute_fm_constant(cfg)
    c_half = compute_fm_constant(cfg, cfg.l_max / 2)
    fo = first_order_constant(cfg)
    diag = {name: (r.result.iterations, r.result.converged, r.result.grad_norm)
            for name, r in (("alpha", a), ("c_fm", c), ("c_fm_half", c_half), ("first_order", fo))}
    return ConstantsReport(a.value, c.value, c_half.value, fo.value, cfg.n_cells, cfg.l_max, diag)


def _curve_point(args):
    t, cfg = args
    try:
        return compute_beta(t, "both", cfg)
    except NumericalFailure as exc:
        return BetaPoint(t, l_max=cfg.l_max, converged=False, error=str(exc))


def beta_curve(t_min: float, t_max: float, steps: int, cfg: ConstantsConfig = ConstantsConfig(),
               warm_start: bool = True, workers: int = 1) -> list:
    """Both-route beta on a uniform t-grid.

    With ``warm_start`` each solve also starts from the previous minimizers
    (sequential); otherwise points are independent and may run in a process pool.
    """
    if steps < 2 or not t_min < t_max:
        raise ValueError("need steps >= 2 and t_min < t_max")
    ts = np.linspace(t_min, t_max, steps)
    # land exactly on the grid values a user would type (e.g. -1.0)
    ts = [float(np.round(t, 12)) for t in ts]
    if not warm_start:
        args = [(t, cfg) for t in ts]
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                return list(pool.map(_curve_point, args))
        return [_curve_point(a) for a in args]
    out = []
    prev = None
    for t in ts:
        try:
            use = prev is not None and prev.t != -1.0 and not prev.error
            pt = compute_beta(t, "both", cfg,
                              warm_phi=prev.phi_profile if use else None,
                              warm_psi=prev.psi_profile if use else None)
        except NumericalFailure as exc:
            pt = BetaPoint(t, l_max=cfg.l_max, converged=False, error=str(exc))
        out.append(pt)
        prev = pt
    return out


BETA_CSV_HEADER = ("t", "beta_phi", "beta_psi", "L_max", "converged")


def beta_csv(points, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BETA_CSV_HEADER)
    for p in points:
        w.writerow([repr(p.t), repr(float(p.beta_phi)), repr(float(p.beta_psi)), repr(float(p.l_max)),
                    str(bool(p.converged and not p.error)).lower()])
    return buf.getvalue()
