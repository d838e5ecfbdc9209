import math

import numpy as np
from hypothesis import given, settings, strategies as st

from vmprandtl import GyreSetup, Profile, band_constants, root_a, scaled_roots, validate
from vmprandtl.barriers import partition
from vmprandtl.cli.artifacts import read_csv, write_csv
from vmprandtl.cubic_roots import eval_cubic

kappas = st.floats(min_value=2.05, max_value=40.0)
slopes = st.floats(min_value=2.3, max_value=10.0)
finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(kappas)
def test_scaled_roots_bracket_and_residual(kappa):
    t1, t2, double = scaled_roots(kappa)
    assert not double
    assert 0.0 < t1 <= 2.0 * kappa / 3.0 <= t2 < kappa
    for t in (t1, t2):
        assert abs(t ** 3 - kappa * t ** 2 + 1.0) <= 1e-10 * max(1.0, kappa * t * t)


@given(slopes, st.floats(min_value=-0.8, max_value=0.8), st.floats(min_value=0.0, max_value=1.0))
def test_unscaled_root_residual(slope, bend, y):
    setup = GyreSetup(1.0, 1.0, 0.1, Profile.polynomial([0.0, 0.0, 0.5 * bend]), Profile.affine(1.0, slope))
    rb = root_a(setup, y)
    assert abs(eval_cubic(setup, y, rb.a)) <= 1e-10


@given(slopes, st.floats(min_value=0.01, max_value=0.9), st.floats(min_value=0.0, max_value=1.0))
def test_band_orderings(slope, mu, y):
    setup = GyreSetup(1.0, 1.0, 0.1, Profile.constant(), Profile.affine(1.0, slope))
    b = band_constants(setup, y, mu)
    assert b.c_minus < b.a < b.c_plus
    assert b.e_plus < 2.0 * b.a ** 2 < b.e_minus


@given(slopes, st.floats(min_value=0.1, max_value=4.0))
def test_kappa_linear_in_lambda0(slope, factor):
    base = GyreSetup(1.0, 1.0, 0.1, Profile.polynomial([0.0, 0.3]), Profile.affine(1.0, slope))
    scaled = GyreSetup(factor, 1.0, 0.1, base.coastline, base.psi0)
    y = np.linspace(0.0, 1.0, 7)
    assert np.allclose(scaled.kappa(y), factor * base.kappa(y), rtol=1e-14)


@given(st.floats(min_value=1.5, max_value=3.5), st.floats(min_value=1e-3, max_value=0.5),
       st.floats(min_value=1e-3, max_value=0.5))
def test_validate_monotone_in_margin(slope, eta_a, eta_b):
    lo, hi = sorted((eta_a, eta_b))
    loose = validate(GyreSetup(1.0, 1.0, lo, Profile.constant(), Profile.affine(1.0, slope)), samples=32)
    tight = validate(GyreSetup(1.0, 1.0, hi, Profile.constant(), Profile.affine(1.0, slope)), samples=32)
    assert loose.passed or not tight.passed


@given(st.floats(min_value=0.01, max_value=0.25), st.floats(min_value=1.0, max_value=5.0))
def test_partition_of_unity(frac, top):
    psi = np.linspace(0.0, top, 257)
    parts = partition(psi, top, frac * top)
    assert np.allclose(sum(parts), 1.0, atol=1e-14)
    assert all(np.all((p >= 0.0) & (p <= 1.0)) for p in parts)


@given(st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=1, max_size=5),
       st.floats(min_value=0.0, max_value=1.0))
def test_polynomial_derivatives(coeffs, y):
    p = Profile.polynomial(coeffs)
    poly = np.polynomial.Polynomial(coeffs)
    assert math.isclose(p(y), poly(y), rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(p.d1(y), poly.deriv()(y), rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(p.d2(y), poly.deriv(2)(y), rel_tol=1e-12, abs_tol=1e-12)


@settings(max_examples=30)
@given(st.lists(finite, min_size=1, max_size=20))
def test_csv_float_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "v.csv"
    write_csv(path, ["v"], [(v,) for v in values])
    _, data = read_csv(path)
    assert [float(x) for x in data[:, 0]] == [float(v) for v in values]
