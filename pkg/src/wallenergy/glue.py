"""Smooth connector from (value A, slope m) at 0 to the flat state 0 at T.

The connector is the mollification, at radius T/4, of the truncated affine
function g(x) = m x + A on (-T/2, T/2) (zero elsewhere) with the standard
bump exp(-1/(1 - x^2)).  Near 0 the mollifier only sees the affine part, near
T it only sees zeros, so the endpoint data are reproduced exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .profile import Grid, HermiteProfile

CONV_POINTS = 64


@dataclass(frozen=True)
class GlueSpec:
    A: float
    m: float
    T: float
    samples: int = 256  # Hermite nodes used for the sampled connector

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"connector length T must be positive, got {self.T}")
        if self.samples < 64:
            raise ValueError("samples must be at least 64")

    @property
    def radius(self) -> float:
        return self.T / 4


def _bump_derivs(z: np.ndarray, k: int) -> np.ndarray:
    """k-th derivative of exp(-1/(1-z^2)) on (-1, 1), zero outside."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1
    x = z[inside]
    q = 1.0 - x * x
    e = np.exp(-1.0 / q)
    if k == 0:
        out[inside] = e
    elif k == 1:
        out[inside] = e * (-2 * x / q**2)
    elif k == 2:
        out[inside] = e * (4 * x * x / q**4 - 2 / q**2 - 8 * x * x / q**3)
    else:
        raise ValueError("bump derivatives implemented up to order 2")
    return out


@lru_cache(maxsize=None)
def _rule(n: int = CONV_POINTS):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=None)
def _bump_mass() -> float:
    # normalized with the same rule used for the convolutions, so the
    # constant function is reproduced to roundoff
    x, w = _rule()
    return float(w @ _bump_derivs(x, 0))


def _bump_cdf(z: np.ndarray) -> np.ndarray:
    """int_{-1}^{z} of the normalized bump."""
    z = np.clip(np.asarray(z, dtype=float), -1.0, 1.0)
    nodes, weights = _rule()
    a = z[..., None]
    y = 0.5 * (a + 1.0) * nodes + 0.5 * (a - 1.0)
    return np.sum(0.5 * (a + 1.0) * weights * _bump_derivs(y, 0), axis=-1) / _bump_mass()


def connector(spec: GlueSpec, x, k: int = 0) -> np.ndarray:
    """k-th derivative (k = 0, 1, 2) of the mollified connector at points ``x``.

    Derivatives fall on the truncated affine function: g' is m on (-T/2, T/2)
    plus point masses g(-T/2+) and -g(T/2-) at the cut-offs, so f' and f''
    are closed forms in the bump and its distribution function.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = spec.radius
    half = spec.T / 2
    if k in (1, 2):
        zl, zr = (x + half) / d, (x - half) / d
        gl, gr = spec.A - spec.m * half, spec.A + spec.m * half
        scale = _bump_mass() * d
        if k == 1:
            return (spec.m * (_bump_cdf(zl) - _bump_cdf(zr))
                    + (gl * _bump_derivs(zl, 0) - gr * _bump_derivs(zr, 0)) / scale)
        return (spec.m * (_bump_derivs(zl, 0) - _bump_derivs(zr, 0)) / scale
                + (gl * _bump_derivs(zl, 1) - gr * _bump_derivs(zr, 1)) / (scale * d))
    if k != 0:
        raise ValueError(f"k must be 0, 1 or 2, got {k}")
    lo = np.maximum(x - d, -half)
    hi = np.minimum(x + d, half)
    active = hi > lo
    nodes, weights = _rule()
    out = np.zeros_like(x)
    if np.any(active):
        a, b = lo[active, None], hi[active, None]
        y = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        g = spec.m * y + spec.A
        kern = _bump_derivs((x[active, None] - y) / d, k) / (_bump_mass() * d ** (k + 1))
        out[active] = np.sum(0.5 * (b - a) * weights * g * kern, axis=1)
    return out


def build_glue(spec: GlueSpec) -> HermiteProfile:
    grid = Grid(0.0, spec.T, spec.samples - 1)
    x = grid.nodes
    return HermiteProfile(grid, connector(spec, x, 0), connector(spec, x, 1))


def derivative_energy(spec: GlueSpec, k: int, panels: int = 64, points: int = 16) -> float:
    """int_0^T |f^(k)|^2 dx from the exact mollified derivatives."""
    edges = np.linspace(0.0, spec.T, panels + 1)
    s, w = np.polynomial.legendre.leggauss(points)
    h = np.diff(edges)[:, None]
    x = (0.5 * h * s + 0.5 * (edges[:-1, None] + edges[1:, None])).reshape(-1)
    vals = connector(spec, x, k).reshape(panels, points)
    return float(np.sum(0.5 * h * w * vals**2))


def glue_bound_ratio(spec: GlueSpec, k: int) -> float:
    """Empirical C_k: int |f^(k)|^2 / ((A^2 + m^2 T^2) T^(1-2k))."""
    if k not in (0, 1, 2):
        raise ValueError(f"k must be 0, 1 or 2, got {k}")
    if spec.A == 0 and spec.m == 0:
        raise ValueError("ratio undefined for A = m = 0")
    scale = (spec.A**2 + spec.m**2 * spec.T**2) * spec.T ** (1 - 2 * k)
    return derivative_energy(spec, k) / scale


def sup_norm(spec: GlueSpec, n: int = 200) -> float:
    return float(np.max(np.abs(connector(spec, np.linspace(0.0, spec.T, n), 0))))


GLUE_CSV_HEADER = ("A", "m", "T", "f0", "df0", "fT", "dfT", "sup_f", "ratio_k0", "ratio_k2")


def glue_row(spec: GlueSpec) -> list:
    f = build_glue(spec)
    degenerate = spec.A == 0 and spec.m == 0
    return [spec.A, spec.m, spec.T, f(0.0, 0), f(0.0, 1), f(spec.T, 0), f(spec.T, 1),
            sup_norm(spec),
            float("nan") if degenerate else glue_bound_ratio(spec, 0),
            float("nan") if degenerate else glue_bound_ratio(spec, 2)]


def random_specs(n: int, seed: int = 42) -> list:
    rng = np.random.default_rng(seed)
    A = rng.uniform(-2, 2, n)
    m = rng.uniform(-2, 2, n)
    T = np.exp(rng.uniform(np.log(0.1), np.log(10.0), n))
    return [GlueSpec(float(a), float(b), float(c)) for a, b, c in zip(A, m, T)]


def glue_csv(specs, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GLUE_CSV_HEADER)
    for s in specs:
        w.writerow([repr(float(v)) for v in glue_row(s)])
    return buf.getvalue()
