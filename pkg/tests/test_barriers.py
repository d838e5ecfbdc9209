import dataclasses
import json

import numpy as np
import pytest

from vmprandtl import (DomainError, GyreSetup, OutsideZone, Profile, blanket_upper, build_barriers,
                      sandwich_check, zone3_eval)
from vmprandtl.barriers import blanket_sub_eval, operator_spot_check, partition, violation_margins
from vmprandtl.cubic_roots import band_constants
from vmprandtl.vm_march import boundary_right

EPS = 1e-3


def test_blanket_upper_examples(bench_setup):
    assert blanket_upper(1.0, bench_setup) == pytest.approx(9.0, rel=1e-14)
    half = dataclasses.replace(bench_setup, lambda0=0.5)
    assert blanket_upper(1.0, half) == pytest.approx(16.0, rel=1e-14)
    short = dataclasses.replace(bench_setup, Y=1e-6)
    assert blanket_upper(1.0, short) == pytest.approx(2.0, abs=1e-5)


def test_blanket_upper_takes_profile_sup(bench_setup, sep_profile):
    assert blanket_upper(sep_profile, bench_setup) == pytest.approx(8.0 + sep_profile.sup_norm(), rel=1e-12)


def test_partition_invariants():
    psi = np.linspace(0.0, 1.0, 2001)
    h1, h2, h3 = partition(psi, 1.0, 0.1)
    assert np.allclose(h1 + h2 + h3, 1.0, atol=1e-15)
    assert np.all((h1 >= 0) & (h2 >= 0) & (h3 >= 0))
    assert np.all(h1[psi <= 0.1] == 1.0) and np.all(h1[psi >= 0.2] == 0.0)
    assert np.all(h3[psi <= 0.8] == 0.0) and np.allclose(h3[psi >= 0.9], 1.0, atol=1e-14)
    assert np.all(np.diff(h1) <= 0) and np.all(np.diff(h3) >= 0)
    with pytest.raises(DomainError):
        partition(psi, 1.0, 0.3)


@pytest.mark.parametrize("sign", [+1, -1])
def test_zone3_matches_right_datum(bench_setup, sep_profile, sign):
    y = 0.5
    band = band_constants(bench_setup, y)
    top = float(bench_setup.psi0(y))
    value = zone3_eval(band, sep_profile, EPS, top - 2 * EPS, y, sign, bench_setup)
    assert value == pytest.approx(boundary_right(sep_profile, bench_setup, EPS, y), rel=1e-12)


def test_zone3_outside_and_wrong_latitude(bench_setup, sep_profile):
    band = band_constants(bench_setup, 0.5)
    top = float(bench_setup.psi0(0.5))
    with pytest.raises(OutsideZone):
        zone3_eval(band, sep_profile, EPS, top - EPS, 0.5, +1, bench_setup)
    with pytest.raises(OutsideZone):
        zone3_eval(band, sep_profile, EPS, 0.1, 0.5, +1, bench_setup, delta=0.05)
    with pytest.raises(DomainError):
        zone3_eval(band, sep_profile, EPS, top - 0.1, 0.25, +1, bench_setup)


def test_zone3_small_eps_limit(bench_setup, sep_profile):
    y = 0.5
    band = band_constants(bench_setup, y)
    top = float(bench_setup.psi0(y))
    d = np.array([0.05, 0.1])
    for eps in (1e-5, 1e-7):
        vals = zone3_eval(band, sep_profile, eps, top - d, y, +1, bench_setup)
        assert np.allclose(vals, band.c_plus ** 2 * d ** 2, rtol=1e-3)


@pytest.fixture(scope="module")
def bset(coarse_field, sep_profile, bench_setup):
    return build_barriers(sep_profile, bench_setup, EPS, field=coarse_field)


def test_blanket_sub_special_points(bset, sep_profile, bench_setup):
    b = bset.blanket_sub
    for y in (0.0, 0.5):
        assert blanket_sub_eval(bset, sep_profile, EPS, 0.0, y) == pytest.approx(bset.boundary.left(y), rel=1e-14)
        top = float(bench_setup.psi0(y))
        assert blanket_sub_eval(bset, sep_profile, EPS, top - 2 * EPS, y) == pytest.approx(
            bset.boundary.right(y), rel=1e-12)
        mid = 0.5 * top
        assert blanket_sub_eval(bset, sep_profile, EPS, mid, y) == pytest.approx(
            b.M * np.exp(-b.alpha0 * y), rel=1e-14)
    with pytest.raises(DomainError):
        blanket_sub_eval(bset, sep_profile, 2 * EPS, 0.1, 0.0)


def test_benchmark_sandwich_passes(bset, coarse_field):
    report = sandwich_check(coarse_field, bset)
    assert report.passed
    names = {c.name for c in report.checks}
    assert {"global_upper", "blanket_lower", "zone3_lower", "zone3_upper", "left_upper"} <= names
    assert bset.m_bar >= float(np.max(coarse_field.w))


def test_scaled_field_breaks_upper_barriers(bset, coarse_field):
    bad = dataclasses.replace(coarse_field, w=1.5 * coarse_field.w)
    report = sandwich_check(bad, bset)
    assert not report.passed
    assert not report.check("zone3_upper").passed
    assert not report.check("left_upper").passed


def test_single_negated_node_is_located(bset, coarse_field):
    w = coarse_field.w.copy()
    w[3, 40] = -w[3, 40]
    report = sandwich_check(dataclasses.replace(coarse_field, w=w), bset)
    c = report.check("blanket_lower")
    assert not c.passed
    assert (c.location["level"], c.location["node"]) == (3, 40)
    assert c.count == 1


def test_wider_band_is_monotone(bench_setup, coarse_field, sep_profile):
    for y in (0.0, 0.5, 1.0):
        narrow, wide = band_constants(bench_setup, y, 0.05), band_constants(bench_setup, y, 0.2)
        assert wide.c_minus <= narrow.c_minus <= narrow.a <= narrow.c_plus <= wide.c_plus
    for mu in (0.05, 0.2, 0.4):
        b = build_barriers(sep_profile, bench_setup, EPS, mu=mu, field=coarse_field)
        assert sandwich_check(coarse_field, b).passed, mu


def test_margins_and_json(bset, coarse_field):
    lower, upper = violation_margins(coarse_field, bset)
    assert lower.shape == coarse_field.w.shape
    tol = 1e-8 * float(np.max(coarse_field.w))
    assert np.min(lower) >= -tol and np.min(upper) >= -tol
    text = json.dumps(sandwich_check(coarse_field, bset).to_dict())
    back = json.loads(text)
    assert back["passed"] is True and back["params"]["m_bar"] == bset.m_bar


def test_unselected_rates_fail_honestly(bench_setup, sep_profile, coarse_field):
    b = build_barriers(sep_profile, bench_setup, EPS)
    assert b.blanket_sub.alpha0 is None
    c = sandwich_check(coarse_field, b).check("blanket_lower")
    assert not c.passed and "no admissible" in c.note


def test_operator_spot_check_fractions(bset):
    out = operator_spot_check(bset, n_y=3, n_psi=9)
    assert out and all(0.0 <= v <= 1.0 for v in out.values())


def test_infeasible_band_setup():
    setup = GyreSetup(1.0, 1.0, 0.1, Profile.constant(), Profile.affine(1.0, 1.5))
    with pytest.raises(Exception):
        band_constants(setup, 0.0)
