"""C1 piecewise-cubic (Hermite) profiles on uniform 1-D grids.

A profile stores the nodal values and nodal first derivatives of a function;
inside each cell the function is the cubic Hermite interpolant of that data.
Degrees of freedom are interleaved as ``[u_0, u'_0, u_1, u'_1, ...]``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np


class DomainError(ValueError):
    """Evaluation point or domain outside what an operation accepts."""


@dataclass(frozen=True)
class Grid:
    x_lo: float
    x_hi: float
    n_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.x_lo) and np.isfinite(self.x_hi)) or self.x_hi <= self.x_lo:
            raise ValueError(f"degenerate grid interval ({self.x_lo}, {self.x_hi})")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells}")
        object.__setattr__(self, "x_lo", float(self.x_lo))
        object.__setattr__(self, "x_hi", float(self.x_hi))
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return self.x_lo + self.h * np.arange(self.n_cells + 1)

    @property
    def n_dofs(self) -> int:
        return 2 * (self.n_cells + 1)

    def midpoints(self) -> np.ndarray:
        return self.x_lo + self.h * (np.arange(self.n_cells) + 0.5)


def hermite_basis(s: np.ndarray, order: int, h: float) -> np.ndarray:
    """Cubic Hermite shape functions at local coordinates ``s`` in [0, 1].

    Returns an array of shape ``s.shape + (4,)`` ordered as
    (left value, left slope, right value, right slope), already including the
    ``h`` factors so that ``basis @ [u_i, d_i, u_{i+1}, d_{i+1}]`` gives the
    ``order``-th x-derivative.
    """
    s = np.asarray(s, dtype=float)
    if order == 0:
        b = [2 * s**3 - 3 * s**2 + 1, h * (s**3 - 2 * s**2 + s),
             -2 * s**3 + 3 * s**2, h * (s**3 - s**2)]
    elif order == 1:
        b = [(6 * s**2 - 6 * s) / h, 3 * s**2 - 4 * s + 1,
             (-6 * s**2 + 6 * s) / h, 3 * s**2 - 2 * s]
    elif order == 2:
        b = [(12 * s - 6) / h**2, (6 * s - 4) / h,
             (-12 * s + 6) / h**2, (6 * s - 2) / h]
    else:
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    return np.stack(np.broadcast_arrays(*b), axis=-1)


@dataclass(frozen=True)
class HermiteProfile:
    grid: Grid
    values: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        n = self.grid.n_cells + 1
        values = np.array(self.values, dtype=float).reshape(-1)
        derivs = np.array(self.derivs, dtype=float).reshape(-1)
        if values.shape != (n,) or derivs.shape != (n,):
            raise ValueError(f"expected {n} nodal values and derivatives")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(derivs))):
            raise ValueError("profile data must be finite")
        values.flags.writeable = False
        derivs.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivs", derivs)

    @classmethod
    def from_dofs(cls, grid: Grid, dofs: np.ndarray) -> "HermiteProfile":
        dofs = np.asarray(dofs, dtype=float)
        return cls(grid, dofs[0::2], dofs[1::2])

    @classmethod
    def from_function(cls, grid: Grid, f: Callable, df: Callable) -> "HermiteProfile":
        """Sample ``f`` and its exact derivative ``df`` at the nodes."""
        x = grid.nodes
        return cls(grid, np.broadcast_to(f(x), x.shape), np.broadcast_to(df(x), x.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "HermiteProfile":
        n = grid.n_cells + 1
        return cls(grid, np.full(n, float(value)), np.zeros(n))

    @property
    def dofs(self) -> np.ndarray:
        q = np.empty(self.grid.n_dofs)
        q[0::2] = self.values
        q[1::2] = self.derivs
        return q

    def cell_dofs(self) -> np.ndarray:
        """Local element data, shape (n_cells, 4)."""
        return np.column_stack([self.values[:-1], self.derivs[:-1],
                                self.values[1:], self.derivs[1:]])

    def __call__(self, x, order: int = 0):
        return evaluate(self, x, order)

    def negated(self) -> "HermiteProfile":
        return HermiteProfile(self.grid, -self.values, -self.derivs)


def evaluate(profile: HermiteProfile, x, order: int = 0):
    """Value (order 0), slope (1) or curvature (2) of the interpolant at ``x``.

    ``x`` may be a scalar or an array.  Second derivatives jump at interior
    nodes; the right limit is returned there (left limit at ``x_hi``).
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    g = profile.grid
    xa = np.asarray(x, dtype=float)
    tol = 1e-12 * max(1.0, abs(g.x_lo), abs(g.x_hi))
    if np.any(~np.isfinite(xa)) or np.any(xa < g.x_lo - tol) or np.any(xa > g.x_hi + tol):
        raise DomainError(f"evaluation point outside [{g.x_lo}, {g.x_hi}]")
    t = (np.clip(xa, g.x_lo, g.x_hi) - g.x_lo) / g.h
    cell = np.minimum(np.floor(t).astype(int), g.n_cells - 1)
    s = t - cell
    local = profile.cell_dofs()[cell]
    out = np.einsum("...k,...k->...", hermite_basis(s, order, g.h), local)
    return float(out) if np.ndim(out) == 0 else out


def rescale(profile: HermiteProfile, new_lo: float, new_hi: float) -> HermiteProfile:
    """Affinely move the profile onto ``(new_lo, new_hi)`` keeping ``n_cells``."""
    if not (new_hi > new_lo):
        raise ValueError(f"degenerate target interval ({new_lo}, {new_hi})")
    g = profile.grid
    stretch = (new_hi - new_lo) / g.length
    return HermiteProfile(Grid(new_lo, new_hi, g.n_cells), profile.values, profile.derivs / stretch)


@dataclass(frozen=True)
class BoundarySpec:
    """Pinned endpoint data; ``None`` leaves the degree of freedom free.

    ``interior_values`` pins nodal values at interior node indices, which the
    odd-symmetric diagnostic runs use to fix the crossing point.
    """

    left_value: Optional[float] = None
    left_deriv: Optional[float] = None
    right_value: Optional[float] = None
    right_deriv: Optional[float] = None
    interior_values: tuple = field(default_factory=tuple)

    def pinned(self, grid: Grid) -> dict:
        """Map of pinned DOF index to its value."""
        last = grid.n_dofs - 2
        out = {}
        for idx, val in ((0, self.left_value), (1, self.left_deriv),
                         (last, self.right_value), (last + 1, self.right_deriv)):
            if val is not None:
                out[idx] = float(val)
        for node, val in self.interior_values:
            if not 0 <= node <= grid.n_cells:
                raise ValueError(f"pinned node {node} outside the grid")
            out[2 * int(node)] = float(val)
        return out

    def free_mask(self, grid: Grid) -> np.ndarray:
        mask = np.ones(grid.n_dofs, dtype=bool)
        mask[list(self.pinned(grid))] = False
        return mask

    def apply(self, profile: HermiteProfile) -> HermiteProfile:
        """Overwrite the pinned DOFs of ``profile``."""
        q = profile.dofs
        for idx, val in self.pinned(profile.grid).items():
            q[idx] = val
        return HermiteProfile.from_dofs(profile.grid, q)

    def satisfied_by(self, profile: HermiteProfile) -> bool:
        q = profile.dofs
        return all(q[i] == v for i, v in self.pinned(profile.grid).items())

    def mirrored(self) -> "BoundarySpec":
        """Same constraints for the function with u -> -u."""
        neg = lambda v: None if v is None else -v  # noqa: E731
        return BoundarySpec(neg(self.left_value), neg(self.left_deriv), neg(self.right_value),
                            neg(self.right_deriv), tuple((n, -v) for n, v in self.interior_values))


def clamped(left: float, right: float) -> BoundarySpec:
    """Values pinned at both ends with zero end slopes."""
    return BoundarySpec(left, 0.0, right, 0.0)


def prolong(profile: HermiteProfile, factor: int = 2) -> HermiteProfile:
    """Exact embedding into a grid with ``factor`` times as many cells."""
    g = profile.grid
    fine = Grid(g.x_lo, g.x_hi, g.n_cells * factor)
    x = fine.nodes
    return HermiteProfile(fine, evaluate(profile, x, 0), evaluate(profile, x, 1))


def resample(profile: HermiteProfile, grid: Grid) -> HermiteProfile:
    """Hermite interpolation of ``profile`` onto another grid over the same domain."""
    x = grid.nodes
    return HermiteProfile(grid, evaluate(profile, x, 0), evaluate(profile, x, 1))


def to_csv(profile: HermiteProfile, path=None) -> str:
    """Write ``x,u,du`` rows; returns the text and also writes it if ``path`` is given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "u", "du"])
    for x, u, du in zip(profile.grid.nodes, profile.values, profile.derivs):
        w.writerow([repr(float(x)), repr(float(u)), repr(float(du))])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def from_csv(source) -> HermiteProfile:
    """Read a profile written by :func:`to_csv` (path or CSV text)."""
    text = Path(source).read_text() if isinstance(source, Path) or (
        isinstance(source, str) and "\n" not in source) else source
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if rows[0] != ["x", "u", "du"]:
        raise ValueError(f"unexpected header {rows[0]}")
    data = np.array(rows[1:], dtype=float)
    x = data[:, 0]
    grid = Grid(x[0], x[-1], len(x) - 1)
    if not np.allclose(x, grid.nodes, rtol=0, atol=1e-9 * max(1.0, grid.length)):
        raise ValueError("profile CSV nodes are not uniform")
    return HermiteProfile(grid, data[:, 1], data[:, 2])
