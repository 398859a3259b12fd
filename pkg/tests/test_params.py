import math

import numpy as np
import pytest

from sle_lab.params import (
    DomainError,
    derive_exponents,
    inverse_exponents,
    lambda_of_r,
    martingale_exponents,
    moment_pair,
    mu_of_q,
    params_from_a,
    supermartingale_condition,
    y_exponent,
    zeta_of_lambda,
)


def test_kappa_8_3():
    p = derive_exponents(8 / 3)
    assert p.d == pytest.approx(4 / 3, abs=1e-15)
    assert p.a == pytest.approx(0.75, abs=1e-15)
    assert p.beta == pytest.approx(-1 / 6, abs=1e-15)
    assert p.xi == pytest.approx(1 / 9, abs=1e-15)
    assert p.xi == pytest.approx(p.kappa**2 / 64, abs=1e-15)


def test_kappa_4():
    p = derive_exponents(4.0)
    assert (p.a, p.d, p.xi) == pytest.approx((0.5, 1.5, 0.25), abs=1e-15)
    assert p.beta == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("kappa", [0.0, -1.0])
def test_kappa_must_be_positive(kappa):
    with pytest.raises(DomainError):
        derive_exponents(kappa)


def test_kappa_8_and_above_flagged_but_usable():
    p = derive_exponents(10.0)
    assert not p.dimension_valid
    assert "dimension-exponents-invalid" in p.flags
    assert p.a == pytest.approx(0.2)
    assert derive_exponents(4.0).flags == ()


def test_params_from_a_round_trip():
    assert params_from_a(0.75).kappa == pytest.approx(8 / 3)


def test_martingale_exponents_r1_a34():
    m = martingale_exponents(1.0, 0.75)
    assert m.lam == pytest.approx(4 / 3, abs=1e-14)
    assert m.q == pytest.approx(1.0, abs=1e-14)
    assert m.mu == pytest.approx(-1 / 3, abs=1e-14)
    assert m.recurrent


def test_martingale_exponents_r0():
    m = martingale_exponents(0.0, 0.3)
    assert (m.lam, m.theta, m.zeta) == (0.0, 0.0, 0.0)


def test_martingale_exponents_r1_a12():
    m = martingale_exponents(1.0, 0.5)
    assert m.lam == pytest.approx(1.5)
    assert y_exponent(1.0, 0.5) == pytest.approx(0.5)
    assert y_exponent(1.0, 0.5) == pytest.approx(2 - derive_exponents(4.0).d)


def test_nonrecurrent_flag():
    m = martingale_exponents(3.0, 0.5)  # q = 1 + 1/2 - 3 < 0
    assert m.q < 0 and not m.recurrent


def test_zeta_is_r_minus_theta():
    m = martingale_exponents(0.7, 0.6)
    assert m.zeta == pytest.approx(m.r - m.theta)
    assert m.theta == pytest.approx(m.r / 2 + m.q * m.r + m.r**2 / 2)


def test_inverse_exponents_examples():
    assert inverse_exponents(4 / 3, 0.75).r == pytest.approx(1.0, abs=1e-12)
    inv0 = inverse_exponents(0.0, 0.6)
    assert inv0.r == pytest.approx(0.0, abs=1e-14) and inv0.zeta == pytest.approx(0.0, abs=1e-14)
    inv = inverse_exponents(2.1875, 1.0)
    assert inv.lambda_c == pytest.approx(2.1875)
    assert zeta_of_lambda(inv.lambda_c, 1.0) == pytest.approx(0.9375, abs=1e-12)
    assert inv.zeta_c == pytest.approx(0.9375)


def test_inverse_exponents_radicand():
    with pytest.raises(DomainError):
        inverse_exponents(100.0, 0.5)


def test_zeta_derivative_at_lambda_c():
    for a in (0.3, 0.5, 0.75, 1.0):
        lc = inverse_exponents(0.0, a).lambda_c
        h = 1e-5
        deriv = (zeta_of_lambda(lc + h, a) - zeta_of_lambda(lc - h, a)) / (2 * h)
        assert deriv == pytest.approx(-1.0, abs=1e-6)


def test_zeta_concave_on_grid():
    a = 0.75
    lam_max = a * (1 + 1 / (2 * a)) ** 2
    lams = np.linspace(-2.0, lam_max, 400)
    z = np.array([zeta_of_lambda(x, a) for x in lams])
    assert np.all(np.diff(z, 2) <= 1e-12)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.75, 1.0])
def test_beta_is_half_mu_at_r1(a):
    p = params_from_a(a)
    assert p.beta == pytest.approx(martingale_exponents(1.0, a).mu / 2, abs=1e-14)


def test_moment_pair_examples():
    mp = moment_pair(0.0, 1.0)
    assert (mp.p, mp.theta_delta) == (0.0, 0.0)
    mp = moment_pair(1.0, 1.0)
    assert mp.p == pytest.approx(0.5)
    # 2p - delta/2 = q delta - delta^2/2; the drift of the exponential martingale vanishes here
    assert mp.theta_delta == pytest.approx(0.5)
    assert mp.theta_delta == pytest.approx(2 * mp.p - mp.delta / 2)
    assert not mp.valid  # delta < q fails


def test_moment_pair_small_delta_taylor():
    q = 1.3
    for t in (1e2, 1e4, 1e6):
        for sign in (1, -1):
            delta = sign * 4 / ((1 + 2 * q) * math.sqrt(t))
            p = moment_pair(delta, q).p
            assert abs(p - sign / math.sqrt(t)) <= 4 / ((1 + 2 * q) ** 2 * t) * (1 + 1e-9)


def test_mu_range():
    for q in (0.01, 0.5, 1, 10):
        assert abs(mu_of_q(q)) < 1


def test_supermartingale_condition():
    assert supermartingale_condition(0.2, 0.0, 0.75)
    assert not supermartingale_condition(0.0, 0.3, 0.5)
    assert lambda_of_r(1.0, 0.75) == pytest.approx(4 / 3)


@pytest.mark.parametrize("q,delta", [(1.0, 1.0), (0.5, -0.7), (2.0, 0.3)])
def test_theta_delta_makes_generator_vanish(q, delta):
    # generator of e^{pL}(K^2+1)^{delta/2}e^{(theta-p)t} under dK=(1/2-q)K dt+sqrt(K^2+1)dB
    mp = moment_pair(delta, q)
    K = np.linspace(-20, 20, 401)
    s = K * K + 1
    g_first = delta * K / s  # d/dK log f
    g_second = delta / s + delta * (delta - 2) * K * K / s**2  # (f''/f)
    drift = (mp.p * (K * K - 1) / s + (mp.theta_delta - mp.p)
             + (0.5 - q) * K * g_first + 0.5 * s * g_second)
    assert np.max(np.abs(drift)) < 1e-12
