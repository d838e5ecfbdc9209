import math

import numpy as np
import pytest
from scipy.optimize import brentq

from vmprandtl import BandInfeasible, GyreSetup, NoPositiveRoot, Profile, band_constants, root_a, scaled_roots
from vmprandtl.cubic_roots import eval_band_quadratic, eval_cubic, eval_cubic_slope, root_a_derivative
from vmprandtl.profiles import KAPPA_CRIT


def affine_setup(slope, lambda0=1.0, coast_slope=0.0):
    return GyreSetup(lambda0, 1.0, 0.1, Profile.affine(0.0, coast_slope), Profile.affine(1.0, slope))


def test_eval_cubic_examples():
    assert eval_cubic(affine_setup(2.5), 0.3, 0.0) == 1.0
    assert eval_cubic(affine_setup(2.0), 0.3, 1.0) == 0.0
    assert eval_cubic(affine_setup(2.5), 0.3, 1.0) == pytest.approx(-0.5, abs=1e-15)


def test_unit_root_from_factorisation():
    band = root_a(affine_setup(2.0), 0.0)
    assert abs(band.a - 1.0) <= 1e-12
    assert abs(band.a_second - (1.0 + math.sqrt(5.0)) / 2.0) <= 1e-10
    assert not band.is_double


def test_double_root_at_threshold():
    band = root_a(affine_setup(KAPPA_CRIT), 0.0)
    assert band.is_double
    assert abs(band.a - 2.0 ** (1.0 / 3.0)) <= 1e-8
    assert abs(band.a - band.a_second) <= 1e-6
    assert abs(eval_cubic_slope(affine_setup(KAPPA_CRIT), 0.0, band.a)) <= 1e-8


def test_below_threshold_raises():
    with pytest.raises(NoPositiveRoot):
        root_a(affine_setup(KAPPA_CRIT - 1e-3), 0.0)


def test_root_against_bracketing_oracle():
    oracle = brentq(lambda t: t ** 3 - 2.5 * t ** 2 + 1.0, 0.0, 5.0 / 3.0, xtol=1e-15)
    band = root_a(affine_setup(2.5), 0.5)
    assert band.a == pytest.approx(oracle, abs=1e-13)
    assert band.a == pytest.approx(0.7576, abs=1e-4)


@pytest.mark.parametrize("kappa", [1.9, 2.1, 2.5, 3.0, 7.0, 40.0])
def test_scaled_roots_residual_and_ordering(kappa):
    t1, t2, double = scaled_roots(kappa)
    assert not double
    for t in (t1, t2):
        assert abs(t ** 3 - kappa * t ** 2 + 1.0) <= 1e-12 * max(1.0, abs(3 * t * t - 2 * kappa * t))
    assert 0.0 < t1 < 2.0 * kappa / 3.0 < t2 < kappa


def test_scaling_collapse_across_nu():
    values = []
    for nu in (1.0, 2.0, 4.0):
        c = math.sqrt(nu - 1.0)
        setup = affine_setup(2.5 * nu ** (1.0 / 3.0), coast_slope=c)
        band = root_a(setup, 0.4)
        assert band.nu == pytest.approx(nu)
        values.append(nu ** (2.0 / 3.0) * band.a)
    assert max(values) - min(values) <= 1e-10


def test_root_decreases_with_kappa():
    kappas = np.linspace(1.95, 6.0, 60)
    roots = [scaled_roots(k)[0] for k in kappas]
    assert np.all(np.diff(roots) < 0.0)


def test_scaled_root_below_one_iff_kappa_above_two():
    assert scaled_roots(2.0 + 1e-6)[0] < 1.0
    assert scaled_roots(2.0 - 1e-6)[0] > 1.0


def test_band_constants_example():
    band = band_constants(affine_setup(2.5), 0.0, mu=0.1)
    a = band.a
    assert 2 * a * a == pytest.approx(1.1479, abs=1e-4)
    assert 2 / a == pytest.approx(2.64002, abs=1e-5)  # 2.6399 when truncated rather than rounded
    assert band.c_plus == pytest.approx(1.1 * a, rel=1e-15)
    assert 2 * band.c_plus ** 2 == pytest.approx(1.3889, abs=1e-4)
    assert 2 * band.c_plus ** 2 < band.e_minus < 2 / a
    assert 0 < band.e_plus < 2 * band.c_minus ** 2 < 2 * a * a
    assert band.c_plus < 2 * 2.5 / 3


def test_band_infeasible_at_kappa_two():
    with pytest.raises(BandInfeasible):
        band_constants(affine_setup(2.0), 0.0)


def test_band_quadratic_vanishes_at_twice_root_squared(rng):
    for _ in range(20):
        slope = rng.uniform(2.05, 8.0)
        setup = affine_setup(slope, lambda0=rng.uniform(0.5, 2.0), coast_slope=rng.uniform(0.0, 0.3))
        if setup.kappa(0.0) <= 2.0:
            continue
        a = root_a(setup, 0.0).a
        assert abs(eval_band_quadratic(setup, 0.0, a, 2 * a * a)) <= 1e-10


def test_root_derivative_matches_finite_difference():
    setup = GyreSetup(1.2, 1.0, 0.1, Profile.sine(0.0, 0.3, 2.0), Profile.polynomial([1.0, 2.5, 0.8]))
    h = 1e-6
    y = 0.45
    fd = (root_a(setup, y + h).a - root_a(setup, y - h).a) / (2 * h)
    assert root_a_derivative(setup, y) == pytest.approx(fd, rel=1e-7)


def test_mu_outside_unit_interval_rejected():
    with pytest.raises(ValueError):
        band_constants(affine_setup(2.5), 0.0, mu=1.0)
