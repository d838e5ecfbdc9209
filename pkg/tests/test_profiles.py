import math

import numpy as np
import pytest

from vmprandtl import DomainError, GyreSetup, Profile, kappa_of, nu_of, validate
from vmprandtl.profiles import KAPPA_CRIT, benchmark_setup


def make(lambda0=1.0, slope=2.5, coast=None, eta=0.1, Y=1.0):
    coast = coast or Profile.constant(0.0)
    return GyreSetup(lambda0, Y, eta, coast, Profile.affine(1.0, slope))


@pytest.mark.parametrize("coast, y, expected", [
    (Profile.constant(0.0), 0.3, 1.0),
    (Profile.affine(0.0, 1.0), 0.7, 2.0),
    (Profile.polynomial([0.0, 0.0, 0.5]), 1.0, 2.0),
])
def test_nu_examples(coast, y, expected):
    assert nu_of(make(coast=coast), y) == pytest.approx(expected, abs=1e-15)


def test_kappa_examples():
    assert kappa_of(make(), 0.4) == pytest.approx(2.5, abs=1e-15)
    tilted = make(slope=2.0, coast=Profile.affine(0.0, 1.0))
    assert kappa_of(tilted, 0.2) == pytest.approx(2.0 / 2.0 ** (1.0 / 3.0), rel=1e-14)
    assert kappa_of(make(lambda0=2.0, slope=1.0), 0.9) == pytest.approx(2.0, abs=1e-15)


def test_out_of_range_latitude_raises():
    with pytest.raises(DomainError):
        nu_of(make(), 1.5)
    with pytest.raises(DomainError):
        kappa_of(make(), -0.1)


def test_validate_benchmark_passes():
    report = validate(benchmark_setup())
    assert report.passed
    kappa = [c for c in report.checks if c.name == "kappa_margin"][0]
    assert kappa.worst_value == pytest.approx(2.5)


def test_validate_weak_slope_names_kappa():
    report = validate(make(slope=1.5))
    assert not report.passed
    assert report.failed_names() == ["kappa_margin"]
    assert report.checks[-1].worst_value < KAPPA_CRIT < 2.1


def test_validate_tilted_coast_fails_margin():
    report = validate(make(coast=Profile.affine(0.0, 1.0)))
    assert report.failed_names() == ["kappa_margin"]
    assert report.checks[-1].worst_value == pytest.approx(2.5 / 2.0 ** (1.0 / 3.0), rel=1e-12)


def test_validate_reports_worst_latitude():
    setup = GyreSetup(1.0, 1.0, 0.1, Profile.constant(0.0), Profile.polynomial([1.0, 3.0, -0.4]))
    report = validate(setup, samples=11)
    kappa = report.checks[-1]
    assert kappa.worst_y == pytest.approx(1.0)
    assert kappa.worst_value == pytest.approx(3.0 - 0.8)


def test_validate_rejects_tiny_grid():
    with pytest.raises(DomainError):
        validate(benchmark_setup(), samples=1)


def test_profile_from_dict_is_strict():
    with pytest.raises(DomainError):
        Profile.from_dict({"kind": "affine", "c0": 1.0, "c1": 2.0, "c2": 0.0})
    with pytest.raises(DomainError):
        Profile.from_dict({"kind": "cubic", "coeffs": [1.0]})
    with pytest.raises(DomainError):
        Profile.polynomial([1, 2, 3, 4, 5, 6])


@pytest.mark.parametrize("prof", [
    Profile.affine(1.0, 2.5),
    Profile.polynomial([0.3, -1.0, 0.5, 0.25]),
    Profile.sine(1.0, 0.2, 3.0, 0.1),
])
def test_profile_round_trip_and_derivatives(prof):
    again = Profile.from_dict(prof.to_dict())
    assert again == prof
    y = np.linspace(0.1, 0.9, 7)
    h = 1e-5
    assert np.allclose(prof.d1(y), (prof(y + h) - prof(y - h)) / (2 * h), atol=1e-8)
    assert np.allclose(prof.d2(y), (prof.d1(y + h) - prof.d1(y - h)) / (2 * h), atol=1e-7)


def test_sine_derivatives_exact():
    prof = Profile.sine(0.0, 2.0, 3.0, 0.5)
    assert prof.d1(0.2) == pytest.approx(6.0 * math.cos(1.1), rel=1e-15)
    assert prof.d2(0.2) == pytest.approx(-18.0 * math.sin(1.1), rel=1e-15)


def test_setup_rejects_bad_scalars():
    with pytest.raises(DomainError):
        GyreSetup(0.0, 1.0, 0.1, Profile.constant(), Profile.affine(1, 2.5))
    with pytest.raises(DomainError):
        GyreSetup(1.0, float("nan"), 0.1, Profile.constant(), Profile.affine(1, 2.5))
