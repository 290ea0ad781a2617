import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wallenergy.energy import curvature_energy, potential_energy
from wallenergy.profile import (BoundarySpec, DomainError, Grid, HermiteProfile, clamped, evaluate,
                                from_csv, prolong, resample, rescale, to_csv)

from _shared import random_profile


def test_constant_reproduced():
    p = HermiteProfile.constant(Grid(0, 1, 7), -1.0)
    assert np.all(evaluate(p, np.linspace(0, 1, 33)) == -1.0)


def test_linear_slope_everywhere():
    p = HermiteProfile.from_function(Grid(0, 1, 5), lambda x: x, lambda x: 1.0)
    np.testing.assert_allclose(evaluate(p, np.linspace(0, 1, 41), 1), 1.0, rtol=0, atol=1e-13)


def test_quadratic_second_derivative():
    p = HermiteProfile.from_function(Grid(0, 2, 4), lambda x: x**2, lambda x: 2 * x)
    assert evaluate(p, 0.5, 2) == pytest.approx(2.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), n=st.integers(1, 40),
       lo=st.floats(-3, 3), length=st.floats(0.1, 10), seed=st.integers(0, 2**32 - 1))
def test_linear_reproduction(a, b, n, lo, length, seed):
    g = Grid(lo, lo + length, n)
    p = HermiteProfile.from_function(g, lambda x: a * x + b, lambda x: a)
    x = np.random.default_rng(seed).uniform(g.x_lo, g.x_hi, 100)
    np.testing.assert_allclose(evaluate(p, x), a * x + b, rtol=0, atol=1e-12 * (1 + abs(a) + abs(b)) * 10)


def test_rescale_identity():
    p = random_profile(3)
    q = rescale(p, 0.0, 1.0)
    assert np.array_equal(q.values, p.values) and np.array_equal(q.derivs, p.derivs)


def test_rescale_linear_to_double_length():
    p = HermiteProfile.from_function(Grid(0, 1, 8), lambda x: x, lambda x: 1.0)
    q = rescale(p, 0.0, 2.0)
    np.testing.assert_allclose(q.derivs, 0.5)
    y = np.linspace(0, 2, 17)
    np.testing.assert_allclose(evaluate(q, y), y / 2, atol=1e-14)


@pytest.mark.parametrize("L", [0.3, 1.7, 5.0])
def test_rescale_scaling_laws(L):
    p = random_profile(11)
    q = rescale(p, 0.0, L)
    assert potential_energy(q) == pytest.approx(L * potential_energy(p), rel=1e-10)
    assert curvature_energy(q) == pytest.approx(curvature_energy(p) / L**3, rel=1e-10)


def test_refinement_order():
    f, df = np.sin, np.cos
    x = np.random.default_rng(0).uniform(0, 3, 100)
    errs = []
    for n in (8, 16, 32, 64):
        p = HermiteProfile.from_function(Grid(0, 3, n), lambda t: 2 * f(2 * t), lambda t: 4 * df(2 * t))
        errs.append(np.max(np.abs(evaluate(p, x) - 2 * f(2 * x))))
    order = -np.polyfit(np.log([8, 16, 32, 64]), np.log(errs), 1)[0]
    assert order >= 3.5


def test_evaluate_rejects_outside_and_bad_order():
    p = random_profile(0)
    with pytest.raises(DomainError):
        evaluate(p, 1.0 + 1e-6)
    with pytest.raises(ValueError):
        evaluate(p, 0.5, 3)


def test_evaluate_right_limit_at_node():
    g = Grid(0, 1, 2)
    p = HermiteProfile(g, [0, 0, 1], [0, 0, 0])
    # u'' jumps at x = 0.5; the node belongs to the right cell
    assert evaluate(p, 0.5, 2) == pytest.approx(6 / 0.25)


@pytest.mark.parametrize("args", [(1, 1, 3), (0, 1, 0), (0, np.inf, 3), (0, 1, 2.5)])
def test_grid_rejects_degenerate(args):
    with pytest.raises(ValueError):
        Grid(*args)


def test_profile_rejects_nonfinite_and_is_readonly():
    g = Grid(0, 1, 2)
    with pytest.raises(ValueError):
        HermiteProfile(g, [0, np.nan, 1], [0, 0, 0])
    p = HermiteProfile(g, [0, 0, 1], [0, 0, 0])
    with pytest.raises(ValueError):
        p.values[0] = 3.0


def test_boundary_spec_apply_and_mask():
    g = Grid(0, 1, 4)
    bc = BoundarySpec(-1.0, 0.0, 0.5, None, interior_values=((2, 0.25),))
    p = bc.apply(random_profile(1, g))
    assert bc.satisfied_by(p)
    assert (p.values[0], p.derivs[0], p.values[-1], p.values[2]) == (-1.0, 0.0, 0.5, 0.25)
    mask = bc.free_mask(g)
    assert mask.sum() == g.n_dofs - 4
    assert not clamped(-1, 1).satisfied_by(p)


def test_prolong_and_resample_preserve_cubics():
    p = random_profile(5)
    q = prolong(p, 2)
    x = np.linspace(0, 1, 97)
    np.testing.assert_allclose(evaluate(q, x), evaluate(p, x), atol=1e-13)
    r = resample(p, Grid(0, 1, 36))
    np.testing.assert_allclose(evaluate(r, x), evaluate(p, x), atol=1e-13)


def test_csv_round_trip(tmp_path):
    p = random_profile(9, Grid(-2, 3, 10))
    path = tmp_path / "p.csv"
    to_csv(p, path)
    q = from_csv(path)
    assert q.grid == p.grid
    np.testing.assert_array_equal(q.values, p.values)
    np.testing.assert_array_equal(q.derivs, p.derivs)
    assert to_csv(p).splitlines()[0] == "x,u,du"
