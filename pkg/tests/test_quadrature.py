import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from plasmonls.exceptions import DomainError, SingularNodeError
from plasmonls.quadrature import (MINUS, PLUS, complex_shift_integral, derivative_row, gauss_legendre,
                                  interpolation_row, neville_zero, pv_log, pv_quadrature, pv_weights,
                                  richardson_complex_shift)


def pv_reference(f, lam, a, b):
    """PV int_a^b f(w) / (w**2 - lam**2) dw via QUADPACK's Cauchy weight."""
    g = lambda w: f(w) / (w + lam)
    return integrate.quad(g, a, b, weight="cauchy", wvar=lam, epsabs=1e-13, epsrel=1e-12, limit=200)[0]


def test_gauss_legendre_exact_for_polynomials():
    rule = gauss_legendre(5, 0.5, 3.0)
    for p in range(10):
        exact = (3.0 ** (p + 1) - 0.5 ** (p + 1)) / (p + 1)
        assert rule.integrate(rule.nodes**p) == pytest.approx(exact, rel=1e-13)
    with pytest.raises(DomainError):
        gauss_legendre(0, 0, 1)
    with pytest.raises(DomainError):
        gauss_legendre(3, 1, 1)


def test_interpolation_and_derivative_rows_reproduce_polynomials():
    rule = gauss_legendre(8, 0.0, 2.0)
    coeffs = np.array([0.3, -1.0, 0.5, 2.0, -0.25, 0.1, -0.05, 0.01])
    p = np.polynomial.Polynomial(coeffs)
    for t in (0.1, 0.77, 1.9):
        assert interpolation_row(rule, t) @ p(rule.nodes) == pytest.approx(p(t), rel=1e-12)
    for j in (0, 4, 7):
        assert derivative_row(rule, j) @ p(rule.nodes) == pytest.approx(p.deriv()(rule.nodes[j]), rel=1e-10)
    row = interpolation_row(rule, float(rule.nodes[3]))
    assert row[3] == 1.0 and np.count_nonzero(row) == 1


def test_interpolation_converges_for_smooth_functions():
    rule = gauss_legendre(16, 0.0, 2.0)
    for t in (0.1, 0.77, 1.9):
        assert interpolation_row(rule, t) @ np.sin(rule.nodes) == pytest.approx(np.sin(t), abs=1e-13)


@pytest.mark.parametrize("lam,a,b", [(1.0, 0.0, 3.0), (0.4, 0.1, 2.0), (2.5, 0.5, 6.0)])
def test_pv_log_matches_quadpack(lam, a, b):
    assert pv_log(lam, a, b) == pytest.approx(pv_reference(lambda w: np.ones_like(w), lam, a, b), rel=1e-10)


@pytest.mark.parametrize("f", [np.cos, lambda w: np.exp(-w), lambda w: w**2 / (1 + w**2)])
@pytest.mark.parametrize("lam", [0.7, 1.33, 2.2])
def test_pv_weights_match_quadpack(f, lam):
    rule = gauss_legendre(40, 0.0, 4.0)
    ref = pv_reference(f, lam, 0.0, 4.0)
    for sign in (PLUS, MINUS):
        val = pv_weights(rule, lam, sign) @ f(rule.nodes)
        assert val.real == pytest.approx(ref, abs=1e-9)
        assert val.imag == pytest.approx(-sign * math.pi * f(lam) / (2 * lam), abs=1e-9)
        call = pv_quadrature(f, lam, rule, sign)
        assert call == pytest.approx(val, abs=1e-9)


def test_pv_weights_at_a_node():
    rule = gauss_legendre(40, 0.0, 4.0)
    lam = float(rule.nodes[17])
    with pytest.raises(SingularNodeError):
        pv_weights(rule, lam)
    val = pv_weights(rule, lam, PLUS, allow_node=True) @ np.cos(rule.nodes)
    assert val.real == pytest.approx(pv_reference(np.cos, lam, 0.0, 4.0), abs=1e-8)


def test_pv_weights_outside_interval_are_plain():
    rule = gauss_legendre(10, 1.0, 2.0)
    np.testing.assert_allclose(pv_weights(rule, 0.5), rule.weights / (rule.nodes**2 - 0.25))
    with pytest.raises(DomainError):
        pv_weights(rule, 0.0)


def test_neville_zero_recovers_polynomial():
    xs = [0.3, 0.2, 0.1]
    ys = [2 - 3 * x + 5 * x * x for x in xs]
    assert neville_zero(xs, ys) == pytest.approx(2.0, rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 2.5), st.sampled_from([PLUS, MINUS]))
def test_complex_shift_tends_to_pv_plus_delta(lam, sign):
    f = lambda w: np.exp(-((w - 1.0) ** 2))
    exact = pv_reference(f, lam, 0.0, 4.0) - sign * 1j * math.pi * f(lam) / (2 * lam)
    val = richardson_complex_shift(f, lam, 0.0, 4.0, sign)
    assert abs(val - exact) <= 1e-6 * max(1.0, abs(exact))


def test_complex_shift_single_eta_is_lorentzian_smoothed():
    # at finite eta the integral differs from the limit by O(eta)
    f = lambda w: np.ones_like(w)
    lam = 1.0
    limit = pv_log(lam, 0.0, 3.0) - 1j * math.pi / 2
    errs = [abs(complex_shift_integral(f, lam, e, 0.0, 3.0) - limit) for e in (1e-2, 1e-3)]
    assert errs[1] < errs[0] / 5
