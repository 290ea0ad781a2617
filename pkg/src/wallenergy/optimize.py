"""Deterministic quasi-Newton minimization over the free nodal DOFs.

The search direction is limited-memory BFGS whose initial inverse Hessian is a
fixed sparse preconditioner: the Gram-matrix combination that matches the
functional's quadratic part at the wells.  Without it the curvature term makes
the problem condition number grow like n_cells^4 and plain L-BFGS stalls.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .energy import SingularityError, functional_value, gram_matrices, integrals, value_and_grad
from .profile import BoundarySpec, Grid, HermiteProfile

log = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    """Energy or gradient became non-finite; carries the last finite iterate."""

    def __init__(self, message: str, last_profile: Optional[HermiteProfile] = None):
        super().__init__(message)
        self.last_profile = last_profile


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 5000
    grad_tol: float = 1e-8
    initial_step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    history: int = 10
    multistart_count: int = 5
    rng_seed: int = 42
    perturbation: float = 0.2
    # stop (unconverged) once the energy drops by less than stall_rtol over stall_window steps
    stall_window: int = 50
    stall_rtol: float = 1e-13
    # multistart energies within tie_rtol (relative) count as equal; the earliest start wins
    tie_rtol: float = 1e-9

    def __post_init__(self):
        if self.max_iters < 0 or self.history < 1 or self.multistart_count < 1:
            raise ValueError("max_iters >= 0, history >= 1 and multistart_count >= 1 required")
        if not (self.grad_tol > 0 and self.initial_step > 0 and self.armijo > 0):
            raise ValueError("tolerances and step sizes must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")


@dataclass
class OptResult:
    profile: HermiteProfile
    energy: float
    iterations: int
    converged: bool
    grad_norm: float
    history: list = field(default_factory=list, repr=False)
    start_index: int = 0


def _well_weights(functional: str, params: dict, init: HermiteProfile) -> tuple:
    """Weights (mass, slope, curvature) of the Gram preconditioner."""
    eps = params.get("eps")
    if functional == "potential":
        return 8.0, 0.0, 0.0
    if functional == "curvature":
        return 0.0, 0.0, 2.0
    if functional == "psi":
        return 8.0, 0.0, 2.0
    if functional == "f_eps":
        return 8.0 / eps, 0.0, 2.0 * eps**3
    if functional == "first_order":
        return 8.0, 2.0, 0.0
    if functional == "phi":
        v = integrals(init)
        P, C = v["P"], v["C"]
        if P <= 0 or C <= 0:
            return 8.0, 0.0, 2.0
        return 8.0 * 0.75 * (C / P) ** 0.25, 0.0, 2.0 * 0.25 * (P / C) ** 0.75
    raise ValueError(f"unknown functional {functional!r}")


class _Preconditioner:
    def __init__(self, grid: Grid, mask: np.ndarray, weights: tuple):
        M, D, S = gram_matrices(grid)
        K = weights[0] * M + weights[1] * D + weights[2] * S
        K = K[mask][:, mask].tocsc()
        diag = K.diagonal()
        scale = float(np.mean(np.abs(diag))) if diag.size else 1.0
        K = K + sp.identity(K.shape[0], format="csc") * (1e-10 * (scale or 1.0))
        self._lu = splu(K) if K.shape[0] else None

    def solve(self, v: np.ndarray) -> np.ndarray:
        return self._lu.solve(v) if self._lu is not None else v


class _Problem:
    def __init__(self, functional, params, grid, mask, base):
        self.functional = functional
        self.eps = params.get("eps")
        self.grid = grid
        self.mask = mask
        self.base = base

    def profile(self, x: np.ndarray) -> HermiteProfile:
        q = self.base.copy()
        q[self.mask] = x
        return HermiteProfile.from_dofs(self.grid, q)

    def value(self, x, functional=None) -> float:
        if not np.all(np.isfinite(x)):
            return np.inf
        try:
            return functional_value(functional or self.functional, self.profile(x), self.eps)
        except FloatingPointError:
            return np.inf

    def value_grad(self, x, functional=None):
        val, g = value_and_grad(functional or self.functional, self.profile(x), self.eps)
        return val, g[self.mask]


def _lbfgs(prob: _Problem, x: np.ndarray, cfg: OptimizerConfig, max_iters: int,
           functional: str, precond: _Preconditioner, history: list):
    """Run the quasi-Newton loop; returns (x, f, g, iterations, converged)."""
    f, g = prob.value_grad(x, functional)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalFailure("non-finite energy or gradient at start", prob.profile(x))
    s_hist, y_hist = [], []
    it = 0
    first = True
    while True:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= cfg.grad_tol:
            return x, f, g, it, True
        if it >= max_iters:
            return x, f, g, it, False
        accepted = False
        for attempt in range(2):
            d = _two_loop(g, s_hist, y_hist, precond)
            slope = float(g @ d)
            if not slope < 0:
                s_hist.clear(), y_hist.clear()
                d = -precond.solve(g)
                slope = float(g @ d)
            t = cfg.initial_step if first else 1.0
            for _ in range(60):
                x_new = x + t * d
                f_new = prob.value(x_new, functional)
                if f_new <= f + cfg.armijo * t * slope:
                    accepted = True
                    break
                t *= cfg.backtrack
            if accepted:
                break
            if not s_hist:
                break
            s_hist.clear(), y_hist.clear()
        if not accepted or f_new > f:
            log.debug("line search stalled at iteration %d (f=%.17g)", it, f)
            return x, f, g, it, False
        try:
            f_new, g_new = prob.value_grad(x_new, functional)
        except SingularityError:
            # product functional vanishes only at its global minimum
            return x_new, f_new, np.zeros_like(g), it + 1, True
        if not np.all(np.isfinite(g_new)):
            raise NumericalFailure(f"non-finite gradient at iteration {it + 1}", prob.profile(x))
        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        if sy > 1e-14 * float(np.sqrt((s @ s) * (y @ y))):
            s_hist.append(s), y_hist.append(y)
            if len(s_hist) > cfg.history:
                s_hist.pop(0), y_hist.pop(0)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        it += 1
        first = False
        w = cfg.stall_window
        if len(history) > w and history[-w - 1] - f <= cfg.stall_rtol * abs(f):
            gnorm = float(np.max(np.abs(g))) if g.size else 0.0
            return x, f, g, it, gnorm <= cfg.grad_tol


def _two_loop(g, s_hist, y_hist, precond):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        q -= a * y
        alphas.append((rho, a))
    r = precond.solve(q)
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        gamma = float(s @ y) / float(y @ precond.solve(y))
        r *= gamma
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * float(y @ r)
        r += s * (a - b)
    return -r


def minimize(functional: str, params: Optional[dict], bc: BoundarySpec, init: HermiteProfile,
             cfg: OptimizerConfig = OptimizerConfig()) -> OptResult:
    """Minimize ``functional`` over the DOFs left free by ``bc`` starting from ``init``."""
    params = dict(params or {})
    grid = init.grid
    if not bc.satisfied_by(init):
        raise ValueError("initial profile does not satisfy the boundary constraints")
    mask = bc.free_mask(grid)
    prob = _Problem(functional, params, grid, mask, init.dofs)
    x = init.dofs[mask]
    history = [prob.value(x)]
    if not np.isfinite(history[0]):
        raise NumericalFailure("non-finite energy at the initial profile", init)
    iters = 0
    if functional == "phi":
        try:
            value_and_grad("phi", init)
        except SingularityError:
            if history[0] == 0.0:
                return OptResult(init, 0.0, 0, True, 0.0, history)
            # leave the singular set with the sum functional, then resume
            pre = _Preconditioner(grid, mask, _well_weights("psi", params, init))
            x, _, _, iters, _ = _lbfgs(prob, x, cfg, min(50, cfg.max_iters), "psi", pre, [])
            history.append(prob.value(x))
    pre = _Preconditioner(grid, mask, _well_weights(functional, params, prob.profile(x)))
    x, f, g, it, conv = _lbfgs(prob, x, cfg, max(cfg.max_iters - iters, 0), functional, pre, history)
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    return OptResult(prob.profile(x), float(f), iters + it, conv, gnorm, history)


def random_perturbation(grid: Grid, rng: np.random.Generator, amplitude: float = 0.2,
                        modes: int = 6) -> HermiteProfile:
    """Smooth random trigonometric bump with sup-norm ``amplitude``, sampled exactly."""
    L = grid.length
    k = np.arange(1, modes + 1)
    coef = rng.uniform(-1, 1, modes) / k
    shift = rng.uniform(0, 2 * np.pi, modes)
    x = grid.nodes
    arg = np.outer(x - grid.x_lo, k * np.pi / L) + shift
    u = np.sin(arg) @ coef
    du = (np.cos(arg) * (k * np.pi / L)) @ coef
    fine = np.linspace(grid.x_lo, grid.x_hi, 2001)
    peak = np.max(np.abs(np.sin(np.outer(fine - grid.x_lo, k * np.pi / L) + shift) @ coef))
    scale = amplitude / peak if peak > 0 else 0.0
    return HermiteProfile(grid, scale * u, scale * du)


def _distinct(inits: Sequence[HermiteProfile]) -> list:
    out = []
    for p in inits:
        if not any(p.grid == q.grid and np.array_equal(p.dofs, q.dofs) for q in out):
            out.append(p)
    return out


def multistart(functional: str, params: Optional[dict], bc: BoundarySpec,
               inits: Sequence[HermiteProfile], cfg: OptimizerConfig = OptimizerConfig(),
               workers: int = 1) -> OptResult:
    """Best of :func:`minimize` over ``inits`` plus seeded random perturbations of the first.

    Ties go to the earliest start; the reduction never depends on completion order.
    """
    starts = _distinct(inits)
    if not starts:
        raise ValueError("multistart needs at least one initial profile")
    rng = np.random.default_rng(cfg.rng_seed)
    base = starts[0]
    for _ in range(cfg.multistart_count - len(starts)):
        bump = random_perturbation(base.grid, rng, cfg.perturbation)
        starts.append(bc.apply(HermiteProfile(base.grid, base.values + bump.values,
                                              base.derivs + bump.derivs)))

    def run(i):
        try:
            res = minimize(functional, params, bc, starts[i], cfg)
            res.start_index = i
            return res
        except (NumericalFailure, FloatingPointError) as exc:
            return exc

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(run, range(len(starts))))
    else:
        outcomes = [run(i) for i in range(len(starts))]
    good = [r for r in outcomes if isinstance(r, OptResult)]
    if not good:
        raise NumericalFailure(f"all {len(starts)} starts failed: {outcomes}")
    best = min(r.energy for r in good)
    tied = [r for r in good if r.energy - best <= cfg.tie_rtol * abs(best)]
    return min(tied, key=lambda r: r.start_index)


# --- standard initial profiles -------------------------------------------------

def _endpoints(bc: BoundarySpec, left, right):
    lv = bc.left_value if left is None else left
    rv = bc.right_value if right is None else right
    if lv is None or rv is None:
        raise ValueError("endpoint states needed for the initializer")
    return float(lv), float(rv)


def _ramp(grid: Grid, lv: float, rv: float, x0: float, x1: float) -> HermiteProfile:
    """C1 cubic smoothstep from lv to rv on [x0, x1], constant outside."""
    x = grid.nodes
    w = x1 - x0
    s = np.clip((x - x0) / w, 0.0, 1.0)
    u = lv + (rv - lv) * (3 * s**2 - 2 * s**3)
    du = (rv - lv) * (6 * s - 6 * s**2) / w
    return HermiteProfile(grid, u, du)


def smoothstep(grid: Grid, bc: BoundarySpec, left=None, right=None) -> HermiteProfile:
    lv, rv = _endpoints(bc, left, right)
    return bc.apply(_ramp(grid, lv, rv, grid.x_lo, grid.x_hi))


def middle_ramp(grid: Grid, bc: BoundarySpec, left=None, right=None) -> HermiteProfile:
    """Steep transition confined to the middle third."""
    lv, rv = _endpoints(bc, left, right)
    L = grid.length
    return bc.apply(_ramp(grid, lv, rv, grid.x_lo + L / 3, grid.x_hi - L / 3))


def tanh_ramp(grid: Grid, bc: BoundarySpec, left=None, right=None, width=None) -> HermiteProfile:
    lv, rv = _endpoints(bc, left, right)
    c = 0.5 * (grid.x_lo + grid.x_hi)
    w = width or grid.length / 12
    x = grid.nodes
    th = np.tanh((x - c) / w)
    u = 0.5 * (lv + rv) + 0.5 * (rv - lv) * th
    du = 0.5 * (rv - lv) * (1 - th**2) / w
    return bc.apply(HermiteProfile(grid, u, du))


def boundary_layer(grid: Grid, bc: BoundarySpec, left=None, right=None,
                   width=None, side: str = "right") -> HermiteProfile:
    """Constant at one end's state with a short ramp to the other end's value."""
    lv, rv = _endpoints(bc, left, right)
    w = width or grid.length / 6
    if side == "right":
        return bc.apply(_ramp(grid, lv, rv, grid.x_hi - w, grid.x_hi))
    return bc.apply(_ramp(grid, lv, rv, grid.x_lo, grid.x_lo + w))


def standard_inits(grid: Grid, bc: BoundarySpec, left=None, right=None) -> list:
    return [smoothstep(grid, bc, left, right), middle_ramp(grid, bc, left, right),
            boundary_layer(grid, bc, left, right)]
