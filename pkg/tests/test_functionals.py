import math

import mpmath
import numpy as np
import pytest

from potwell.functionals import (C0Estimate, Exponents, WellClass, bubble, c0_estimate, classify, compute_B,
                                 constants_build, energy_from_ab, energy_report, exponent_p, hls_check,
                                 hls_constant, is_zero, nehari_scale, sobolev_constant)
from potwell.grid import BoxDomain, Field, sine_mode, zeros


def mp_hls(mu):
    mu = mpmath.mpf(mu)
    return (mpmath.pi ** (mu / 2) * mpmath.gamma(1.5 - mu / 2) / mpmath.gamma(3 - mu / 2)
            * (mpmath.gamma(1.5) / mpmath.gamma(3)) ** (-1 + mu / 3))


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0, 2.5])
def test_hls_constant_high_precision(mu):
    assert hls_constant(mu) == pytest.approx(float(mp_hls(mu)), rel=1e-13)


def test_sobolev_constant():
    assert sobolev_constant() == pytest.approx(3 * (math.pi / 2) ** (4 / 3), rel=1e-14)


def test_constants_mu2():
    c = constants_build(2.0)
    assert exponent_p(2.0) == 4
    assert c.c_hls == pytest.approx(7.3039, abs=1e-4)
    assert c.s_sob == pytest.approx(5.4779, abs=1e-4)
    assert c.s_hl == pytest.approx(3.3322, abs=1e-4)
    assert c.m_mu == pytest.approx(1.8664, abs=1e-4)
    assert c.m_mu == pytest.approx(0.375 * c.s_hl ** (4 / 3), rel=1e-14)


def test_exponents():
    e = Exponents(1.0)
    assert e.p == 5 and e.quotient_power == pytest.approx(0.2) and e.c0_factor == pytest.approx(2.5)
    with pytest.raises(ValueError):
        Exponents(3.5)


@pytest.mark.parametrize("a,b,expect", [
    (1.0, 0.5, WellClass.IN_W),
    (1.0, 1.5, WellClass.IN_V),
    (10.0, 1.0, WellClass.NEITHER),
    (1.0, 1.0, WellClass.NEITHER),   # on the Nehari manifold
])
def test_classify(a, b, expect):
    e, c = Exponents(2.0), constants_build(2.0)
    assert energy_from_ab(a, b, e, c).klass is expect


def test_zero_field():
    d = BoxDomain(1.0, 8)
    assert is_zero(zeros(d))
    assert classify(0, 0, 0, 0, 1.0, zero=True) is WellClass.ZERO


def test_nehari_scale_lands_on_manifold(grid16, mu2):
    d, k = grid16
    e, c = mu2
    u = sine_mode(d)
    r = energy_report(u, k, e, c)
    th = nehari_scale(r.a, r.b, e)
    r2 = energy_report(th * u, k, e, c)
    assert abs(r2.i) <= 1e-10 * r2.a
    with pytest.raises(ValueError):
        nehari_scale(1.0, 0.0, e)


def test_B_homogeneity(grid16, mu2):
    d, k = grid16
    e, _ = mu2
    u = Field(d, np.random.default_rng(0).standard_normal((16, 16, 16)))
    assert compute_B(2 * u, k, e) == pytest.approx(2 ** (2 * e.p) * compute_B(u, k, e), rel=1e-12)
    assert compute_B(-u, k, e) == pytest.approx(compute_B(u, k, e), rel=1e-14)


def test_hls_inequality_random(grid16, mu2):
    d, k = grid16
    e, c = mu2
    rng = np.random.default_rng(1)
    for _ in range(5):
        assert hls_check(Field(d, rng.standard_normal((16, 16, 16))), k, e, c).ok
    assert hls_check(bubble(d, (0.5, 0.5, 0.5), 0.1), k, e, c).ok


def test_bubble_validation():
    d = BoxDomain(1.0, 8)
    with pytest.raises(ValueError):
        bubble(d, (0.5, 0.5, 0.5), 0.0)
    with pytest.raises(ValueError):
        bubble(d, (1.5, 0.5, 0.5), 0.2)


def test_c0_estimate():
    e = Exponents(2.0)
    m = constants_build(2.0).m_mu
    est = c0_estimate([2 * m] * 20, e)
    assert est == C0Estimate(e.c0_factor * 2 * m, False)
    assert c0_estimate(np.linspace(1, 0, 20), e).provisional
    assert c0_estimate([-1e-9] * 5, e).value == 0.0
