"""Measured constants for the interpolation inequalities behind compactness.

inter1: int u'^2 <= c (int u^2)^(1/2) (int u''^2)^(1/2) when u' vanishes somewhere.
inter2: (int u'^2)^(1/2) <= c/l (int u^2)^(1/2) + c l (int u''^2)^(1/2), 0 < l < |I|.
inter3: int_{inner} eps u'^2 <= C' F_eps(u) on a shrunken subinterval.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .energy import f_eps, integrals
from .profile import Grid, HermiteProfile, evaluate


class PreconditionError(ValueError):
    """Inputs outside the hypotheses under which an inequality is claimed."""


@dataclass(frozen=True)
class RatioSample:
    name: str
    seed: int
    lhs: float
    rhs: float
    ratio: float


def slope_vanishes(p: HermiteProfile) -> bool:
    """Whether u' has a zero on the closed domain (u' is quadratic per cell)."""
    d = p.derivs
    if np.any(d == 0) or np.any(np.sign(d[:-1]) != np.sign(d[1:])):
        return True
    h = p.grid.h
    loc = p.cell_dofs()
    # u'(s) = c2 s^2 + c1 s + c0 on each cell; check the interior extremum
    coef = np.array([(6, 3, -6, 3), (-6, -4, 6, -2), (0, 1, 0, 0)], dtype=float)
    c2, c1, c0 = ((loc * np.array([1 / h, 1, 1 / h, 1])) @ coef.T).T
    with np.errstate(divide="ignore", invalid="ignore"):
        s_star = np.where(c2 != 0, -c1 / (2 * c2), -1.0)
    inside = (s_star > 0) & (s_star < 1)
    ext = c2 * s_star**2 + c1 * s_star + c0
    return bool(np.any(inside & (np.sign(ext) != np.sign(c0))) or np.any(inside & (ext == 0)))


def inter1_ratio(p: HermiteProfile) -> float:
    if not slope_vanishes(p):
        raise PreconditionError("u' has no zero on the domain")
    v = integrals(p)
    if v["M"] <= 0 or v["C"] <= 0:
        raise PreconditionError("degenerate denominator (int u^2 or int u''^2 vanishes)")
    return v["D"] / np.sqrt(v["M"] * v["C"])


def inter2_ratio(p: HermiteProfile, l: float) -> float:
    if not 0 < l < p.grid.length:
        raise ValueError(f"l must lie in (0, {p.grid.length}), got {l}")
    v = integrals(p)
    denom = np.sqrt(v["M"]) / l + l * np.sqrt(v["C"])
    if denom <= 0:
        raise ValueError("degenerate denominator")
    return float(np.sqrt(v["D"]) / denom)


def slope_energy_between(p: HermiteProfile, a: float, b: float) -> float:
    """int_a^b |u'|^2, exact for the representation (split at grid nodes)."""
    g = p.grid
    nodes = g.nodes
    cuts = np.concatenate([[a], nodes[(nodes > a) & (nodes < b)], [b]])
    s, w = np.polynomial.legendre.leggauss(8)
    lo, hi = cuts[:-1, None], cuts[1:, None]
    x = 0.5 * (hi - lo) * s + 0.5 * (hi + lo)
    du = evaluate(p, x, 1)
    return float(np.sum(0.5 * (hi - lo) * w * du**2))


def inter3_check(u_seq: Sequence, inner_margin: float, name: str = "inter3") -> list:
    """Inner weighted Dirichlet energy over the full F_eps energy for each (profile, eps)."""
    out = []
    for i, (p, eps) in enumerate(u_seq):
        g = p.grid
        if not 0 < inner_margin < g.length / 2:
            raise ValueError("inner_margin must be positive and below half the domain length")
        lhs = eps * slope_energy_between(p, g.x_lo + inner_margin, g.x_hi - inner_margin)
        rhs = f_eps(p, eps)
        ratio = 0.0 if lhs == 0 else lhs / rhs
        out.append(RatioSample(name, i, lhs, rhs, ratio))
    return out


def random_cosine_profile(grid: Grid, seed: int, modes: int = 8) -> HermiteProfile:
    """sum_j a_j cos(j pi (x - x_lo)/len), a_j ~ U[-1, 1] / j^2; slope vanishes at x_lo."""
    rng = np.random.default_rng(seed)
    j = np.arange(1, modes + 1)
    a = rng.uniform(-1, 1, modes) / j**2
    k = j * np.pi / grid.length
    x = grid.nodes - grid.x_lo
    u = np.cos(np.outer(x, k)) @ a
    du = -(np.sin(np.outer(x, k)) * k) @ a
    return HermiteProfile(grid, u, du)


def cosine_sweep(n_profiles: int = 200, n_cells: int = 256, seed0: int = 0,
                 domain=(0.0, 1.0)) -> list:
    """inter1 and inter2 ratios over the random cosine ensemble."""
    grid = Grid(domain[0], domain[1], n_cells)
    out = []
    for seed in range(seed0, seed0 + n_profiles):
        p = random_cosine_profile(grid, seed)
        v = integrals(p)
        lhs1, rhs1 = v["D"], np.sqrt(v["M"] * v["C"])
        out.append(RatioSample("inter1", seed, lhs1, rhs1, inter1_ratio(p)))
        for frac in np.arange(1, 10) / 10:
            l = frac * grid.length
            rhs2 = np.sqrt(v["M"]) / l + l * np.sqrt(v["C"])
            out.append(RatioSample(f"inter2_l{frac:.1f}", seed, np.sqrt(v["D"]), rhs2,
                                   inter2_ratio(p, l)))
    return out


INEQ_CSV_HEADER = ("name", "seed", "lhs", "rhs", "ratio")


def ratios_csv(samples: Iterable[RatioSample], header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INEQ_CSV_HEADER)
    for s in samples:
        w.writerow([s.name, s.seed, repr(float(s.lhs)), repr(float(s.rhs)), repr(float(s.ratio))])
    return buf.getvalue()
