import numpy as np
import pytest

from wallenergy.experiments import ExperimentSpec, minimize_G
from wallenergy.inequalities import (INEQ_CSV_HEADER, PreconditionError, cosine_sweep,
                                     inter1_ratio, inter2_ratio, inter3_check, random_cosine_profile,
                                     ratios_csv, slope_energy_between, slope_vanishes)
from wallenergy.profile import Grid, HermiteProfile


def cos_profile(n=512):
    return HermiteProfile.from_function(Grid(0, 1, n), lambda x: np.cos(np.pi * x),
                                        lambda x: -np.pi * np.sin(np.pi * x))


def test_inter1_cosine_closed_form():
    # int u^2 = 1/2, int u'^2 = pi^2/2, int u''^2 = pi^4/2 give ratio 1
    assert inter1_ratio(cos_profile()) == pytest.approx(1.0, rel=1e-6)


def test_inter1_constant_is_degenerate():
    with pytest.raises(PreconditionError):
        inter1_ratio(HermiteProfile.constant(Grid(0, 1, 8), 2.0))


def test_inter1_requires_vanishing_slope():
    p = HermiteProfile.from_function(Grid(0, 1, 8), lambda x: np.exp(x), lambda x: np.exp(x))
    assert not slope_vanishes(p)
    with pytest.raises(PreconditionError):
        inter1_ratio(p)


def test_slope_zero_inside_a_cell_detected():
    g = Grid(0, 1, 1)
    assert slope_vanishes(HermiteProfile(g, [0, 0], [1, 1]))
    assert not slope_vanishes(HermiteProfile(g, [0, 1], [1, 1]))


def test_inter2_affine_closed_form():
    p = HermiteProfile.from_function(Grid(0, 2, 8), lambda x: x, lambda x: 1.0)
    assert inter2_ratio(p, 1.0) == pytest.approx((8 / 3) ** -0.5 * np.sqrt(2), rel=1e-12)


def test_inter2_rejects_bad_arguments():
    g = Grid(0, 1, 8)
    with pytest.raises(ValueError):
        inter2_ratio(HermiteProfile.constant(g, 0.0), 0.5)
    with pytest.raises(ValueError):
        inter2_ratio(cos_profile(64), 1.0)


def test_random_ensemble_has_flat_left_end():
    p = random_cosine_profile(Grid(0, 1, 64), seed=3)
    assert abs(p.derivs[0]) < 1e-14


def test_sweep_bounded_finite_and_refinement_stable():
    coarse = cosine_sweep(200, 256)
    fine = cosine_sweep(200, 512)
    r1 = np.array([s.ratio for s in coarse])
    r2 = np.array([s.ratio for s in fine])
    assert np.all(np.isfinite(r1)) and np.all(r1 >= 0)
    assert np.max(np.abs(r2 - r1) / r1) < 0.01
    inter1 = [s.ratio for s in coarse if s.name == "inter1"]
    assert max(inter1) < 10 * inter1_ratio(cos_profile())


def test_slope_energy_between_exact():
    p = cos_profile(64)
    # int_a^b pi^2 sin^2(pi x) dx
    a, b = 0.13, 0.71
    exact = np.pi**2 * ((b - a) / 2 - (np.sin(2 * np.pi * b) - np.sin(2 * np.pi * a)) / (4 * np.pi))
    assert slope_energy_between(p, a, b) == pytest.approx(exact, rel=1e-6)


def test_inter3_constant_well_gives_zero():
    p = HermiteProfile.constant(Grid(0, 1, 32), 1.0)
    (s,) = inter3_check([(p, 0.1)], 0.1)
    assert s.ratio == 0.0


def test_inter3_bounded_on_computed_minimizers():
    spec = ExperimentSpec(epsilons=(0.2, 0.1, 0.05), b0=0.0, refine_exponent=0.0)
    seq = [(minimize_G(e, spec).profile, e) for e in spec.epsilons]
    samples = inter3_check(seq, 0.1)
    ratios = [s.ratio for s in samples]
    assert all(np.isfinite(r) and 0 <= r <= 1 for r in ratios)


def test_ratios_csv():
    text = ratios_csv(cosine_sweep(2, 64))
    lines = text.splitlines()
    assert lines[0] == ",".join(INEQ_CSV_HEADER)
    assert len(lines) == 1 + 2 * 10
