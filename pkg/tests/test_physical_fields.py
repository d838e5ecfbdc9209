import dataclasses

import numpy as np
import pytest
from scipy.integrate import quad

from vmprandtl import NonPositiveW, WindowTooShort, decay_fit, reconstruct_uv, root_a, xi_of_psi
from vmprandtl.physical_fields import PhysicalField, PhysicalLevel, xi_lattice


def test_xi_of_psi_linear_w():
    assert xi_of_psi(lambda s: s, 0.64) == pytest.approx(2.0 * 0.8, rel=1e-13)
    assert xi_of_psi(lambda s: s, 0.0) == 0.0


def test_xi_of_psi_quadratic_right_end():
    a, top = 1.3, 1.0
    for psi in (0.5, 0.99, 0.99999):
        exact = np.log(top / (top - psi)) / a
        assert xi_of_psi(lambda s: a * a * (top - s) ** 2, psi) == pytest.approx(exact, rel=1e-10)


def test_xi_of_psi_composite_against_quad():
    w = lambda s: s * (1.2 - s) ** 2 + 0.01 * s
    exact, _ = quad(lambda s: 1.0 / np.sqrt(w(s)), 0.0, 1.0, limit=200)
    assert xi_of_psi(w, 1.0) == pytest.approx(exact, rel=1e-8)


def test_xi_of_psi_rejects_nonpositive():
    with pytest.raises(NonPositiveW):
        xi_of_psi(lambda s: s - 0.5, 1.0)
    with pytest.raises(NonPositiveW):
        xi_lattice(np.linspace(0, 1, 5), np.array([1.0, 1.0, 0.0, 1.0, 1.0]))


def test_xi_lattice_exact_on_local_models():
    psi = np.linspace(0.0, 0.4, 41)
    xi = xi_lattice(psi, 0.3 + 2.0 * psi)
    # left half: linear w is integrated exactly
    assert np.allclose(xi[:21], np.sqrt(0.3 + 2 * psi[:21]) - np.sqrt(0.3), rtol=1e-12, atol=1e-15)
    # right half: linear sqrt(w) is integrated exactly
    v = 1.0 + 3.0 * psi
    xi = xi_lattice(psi, v * v)
    exact = np.log(v) / 3.0
    assert np.allclose(np.diff(xi)[20:], np.diff(exact)[20:], rtol=1e-12)


@pytest.fixture(scope="module")
def phys(bench_field):
    return reconstruct_uv(bench_field)


def test_reconstruction_invariants(phys):
    for lev in phys.levels:
        assert lev.u[0] == 0.0
        assert np.allclose(lev.v, np.sqrt(lev.w), rtol=0, atol=0)
        assert lev.xi[0] == 0.0 and np.all(np.diff(lev.xi) > 0)


def test_zero_q_gives_zero_u(coarse_field):
    flat = dataclasses.replace(coarse_field, q=np.zeros_like(coarse_field.w))
    for lev in reconstruct_uv(flat).levels:
        assert np.all(lev.u == 0.0)


def _model_field(rate, eps=1e-3, top=1.0):
    xi = np.linspace(0.0, 4.0, 200)
    d = 0.5 * np.exp(-rate * xi)
    psi = top - eps - d
    w = np.ones_like(xi)
    return PhysicalField([PhysicalLevel(0.0, eps, top, psi, xi, w, w, np.zeros_like(xi))])


def test_decay_fit_exact_model():
    fit = decay_fit(_model_field(1.7), 0.0)
    assert fit.rate == pytest.approx(1.7, rel=1e-10)
    assert fit.prefactor == pytest.approx(0.5, rel=1e-10)
    assert fit.samples >= 4


def test_decay_fit_window_too_short():
    with pytest.raises(WindowTooShort):
        decay_fit(_model_field(1.7), 0.0, window=(1e-3, 1.001e-3))


def test_benchmark_decay_rate(phys, bench_setup):
    for y in (0.25, 0.5, 1.0):
        fit = decay_fit(phys, y, setup=bench_setup)
        assert fit.a == root_a(bench_setup, y).a
        assert fit.relative_gap < 0.05, (y, fit.rate, fit.a)
