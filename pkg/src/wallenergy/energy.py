"""Integral functionals of Hermite profiles and their exact gradients.

All integrals use an 8-point Gauss-Legendre rule per cell.  For a cubic
profile every integrand here is a polynomial of degree at most 12 per cell,
so the discrete energies are exact up to roundoff.

Double-well potential is fixed to W(z) = (z^2 - 1)^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .profile import Grid, HermiteProfile, hermite_basis

POINTS_PER_CELL = 8
FUNCTIONALS = ("potential", "curvature", "phi", "psi", "f_eps", "first_order")

# 4 / 3^(3/4): the AM-GM constant linking sums L P + L^-3 C to the product P^(3/4) C^(1/4).
AMGM = 4.0 / 3.0**0.75


class SingularityError(ArithmeticError):
    """Gradient of P^(3/4) C^(1/4) requested where P or C vanishes."""


@dataclass(frozen=True)
class QuadratureRule:
    points_per_cell: int = POINTS_PER_CELL

    def __post_init__(self):
        if self.points_per_cell < 8:
            raise ValueError("points_per_cell must be at least 8")

    @property
    def abscissae(self) -> np.ndarray:
        return _gauss(self.points_per_cell)[0]

    @property
    def weights(self) -> np.ndarray:
        return _gauss(self.points_per_cell)[1]


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def _basis_tables(h: float, n: int = POINTS_PER_CELL):
    s, w = _gauss(n)
    return tuple(hermite_basis(s, k, h) for k in range(3)) + (w * h,)


def _fields(profile: HermiteProfile):
    """u, u', u'' at quadrature points (n_cells, Q) plus the per-point weights."""
    h = profile.grid.h
    b0, b1, _, wh = _basis_tables(h)
    loc = profile.cell_dofs()
    # u'' against the secant slope: cancels exactly on affine data instead of
    # leaving O(1/h^2) roundoff that phi's quarter power would amplify
    s, _ = _gauss(POINTS_PER_CELL)
    sec = (loc[:, 2] - loc[:, 0]) / h
    d2u = (np.outer(loc[:, 1] - sec, 6 * s - 4) + np.outer(loc[:, 3] - sec, 6 * s - 2)) / h
    return loc @ b0.T, loc @ b1.T, d2u, wh


def _scatter(grid: Grid, local: np.ndarray) -> np.ndarray:
    """Add per-cell contributions of shape (n_cells, 4) into the global DOF vector."""
    g = np.zeros(grid.n_dofs)
    g[:-2] += local[:, :2].reshape(-1)
    g[2:] += local[:, 2:].reshape(-1)
    return g


def _weak_form(grid: Grid, c0=None, c1=None, c2=None) -> np.ndarray:
    """Gradient of sum_q w_q (c0 * dv + c1 * dv' + c2 * dv'') over all cells."""
    b0, b1, b2, wh = _basis_tables(grid.h)
    local = np.zeros((grid.n_cells, 4))
    for c, b in ((c0, b0), (c1, b1), (c2, b2)):
        if c is not None:
            local += (c * wh) @ b
    return _scatter(grid, local)


def integrals(profile: HermiteProfile) -> dict:
    """P = int W(u), C = int u''^2, D = int u'^2, M = int u^2 in one pass."""
    u, du, d2u, wh = _fields(profile)
    return {
        "P": float(np.sum(wh * (u * u - 1.0) ** 2)),
        "C": float(np.sum(wh * d2u * d2u)),
        "D": float(np.sum(wh * du * du)),
        "M": float(np.sum(wh * u * u)),
    }


def potential_energy(p: HermiteProfile) -> float:
    u, _, _, wh = _fields(p)
    return float(np.sum(wh * (u * u - 1.0) ** 2))


def curvature_energy(p: HermiteProfile) -> float:
    _, _, d2u, wh = _fields(p)
    return float(np.sum(wh * d2u * d2u))


def dirichlet_energy(p: HermiteProfile) -> float:
    _, du, _, wh = _fields(p)
    return float(np.sum(wh * du * du))


def _require_unit(p: HermiteProfile):
    g = p.grid
    if g.x_lo != 0.0 or g.x_hi != 1.0:
        from .profile import DomainError
        raise DomainError(f"phi is defined on (0, 1); got ({g.x_lo}, {g.x_hi}). Rescale first.")


def phi(p: HermiteProfile) -> float:
    _require_unit(p)
    v = integrals(p)
    return v["P"] ** 0.75 * v["C"] ** 0.25


def psi(p: HermiteProfile) -> float:
    v = integrals(p)
    return v["P"] + v["C"]


def f_eps(p: HermiteProfile, eps: float) -> float:
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    v = integrals(p)
    return v["P"] / eps + eps**3 * v["C"]


@dataclass(frozen=True)
class EnergyBreakdown:
    potential: float
    curvature: float
    phi: float
    psi: float
    epsilon: Optional[float] = None
    f_eps: Optional[float] = None

    @classmethod
    def of(cls, p: HermiteProfile, eps: Optional[float] = None) -> "EnergyBreakdown":
        v = integrals(p)
        P, C = v["P"], v["C"]
        fe = None if eps is None else P / eps + eps**3 * C
        return cls(P, C, P**0.75 * C**0.25, P + C, eps, fe)

    CSV_HEADER = ("P", "C", "phi", "psi", "eps", "f_eps")

    def csv_row(self) -> list:
        return [self.potential, self.curvature, self.phi, self.psi,
                "" if self.epsilon is None else self.epsilon,
                "" if self.f_eps is None else self.f_eps]


def value_and_grad(functional: str, p: HermiteProfile, eps: Optional[float] = None):
    """Discrete functional value and its gradient with respect to all DOFs."""
    u, du, d2u, wh = _fields(p)
    g = p.grid
    w = u * u - 1.0
    if functional in ("potential", "curvature", "psi", "phi", "f_eps"):
        P = float(np.sum(wh * w * w))
        C = float(np.sum(wh * d2u * d2u))
        dP = lambda: _weak_form(g, c0=4.0 * w * u)  # noqa: E731
        dC = lambda: _weak_form(g, c2=2.0 * d2u)  # noqa: E731
        if functional == "potential":
            return P, dP()
        if functional == "curvature":
            return C, dC()
        if functional == "psi":
            return P + C, _weak_form(g, c0=4.0 * w * u, c2=2.0 * d2u)
        if functional == "f_eps":
            if eps is None or not eps > 0:
                raise ValueError("f_eps needs a positive eps")
            return P / eps + eps**3 * C, _weak_form(g, c0=4.0 * w * u / eps, c2=2.0 * eps**3 * d2u)
        _require_unit(p)
        val = P**0.75 * C**0.25
        if P <= 0.0 or C <= 0.0:
            raise SingularityError(f"phi gradient undefined at P={P}, C={C}")
        a = 0.75 * (C / P) ** 0.25
        b = 0.25 * (P / C) ** 0.75
        return val, _weak_form(g, c0=a * 4.0 * w * u, c2=b * 2.0 * d2u)
    if functional == "first_order":
        val = float(np.sum(wh * (w * w + du * du)))
        return val, _weak_form(g, c0=4.0 * w * u, c1=2.0 * du)
    raise ValueError(f"unknown functional {functional!r}; expected one of {FUNCTIONALS}")


def functional_value(functional: str, p: HermiteProfile, eps: Optional[float] = None) -> float:
    if functional == "phi":
        return phi(p)
    if functional == "f_eps":
        return f_eps(p, eps)
    v = integrals(p)
    table = {"potential": v["P"], "curvature": v["C"], "psi": v["P"] + v["C"],
             "first_order": v["P"] + v["D"]}
    if functional not in table:
        raise ValueError(f"unknown functional {functional!r}; expected one of {FUNCTIONALS}")
    return table[functional]


def energy_gradient(p: HermiteProfile, functional: str, params: Optional[dict] = None,
                    free_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact gradient of the discretized functional over the free DOFs."""
    eps = (params or {}).get("eps")
    _, grad = value_and_grad(functional, p, eps)
    return grad if free_mask is None else grad[np.asarray(free_mask, dtype=bool)]


def gram_matrices(grid: Grid) -> tuple:
    """Sparse Gram matrices (int v w, int v' w', int v'' w'') over all DOFs."""
    b = _basis_tables(grid.h)
    wh = b[3]
    n = grid.n_cells
    rows = (2 * np.arange(n)[:, None] + np.arange(4)[None, :])
    r = np.repeat(rows, 4, axis=1).reshape(-1)
    c = np.tile(rows, (1, 4)).reshape(-1)
    out = []
    for k in range(3):
        local = (b[k].T * wh) @ b[k]
        data = np.tile(local.reshape(-1), n)
        out.append(sp.csr_matrix((data, (r, c)), shape=(grid.n_dofs, grid.n_dofs)))
    return tuple(out)
