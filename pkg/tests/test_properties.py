"""Property tests for pathwise invariants of the flows and chains."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sle_lab.diffusion import simulate_K
from sle_lab.driving import DrivingPath, reverse_driver, sample_brownian_driver
from sle_lab.loewner import build_chain, forward_point, reverse_point_exact, slit_forward, slit_inverse
from sle_lab.natural import tau_derivative_sum
from sle_lab.params import derive_exponents

kappas = st.sampled_from([1.0, 2.0, 8 / 3, 4.0, 6.0, 7.5])
seeds = st.integers(0, 10_000)
upper = st.builds(complex, st.floats(-3, 3), st.floats(0.05, 3))

cfg = settings(max_examples=25, deadline=None)


@cfg
@given(upper, st.floats(-2, 2), st.floats(1e-4, 1.0))
def test_slit_round_trip(z, u, c):
    # points on the slit map to the real line; stay off it and away from the tip
    assume(abs((z - u).real) > 1e-6 or z.imag > math.sqrt(c) + 1e-6)
    assume(abs((z - u) ** 2 + c) > 1e-3)
    w, dw = slit_forward(z, u, c)
    assert w.imag > 0
    back, db = slit_inverse(w, u, c)
    assert abs(back - z) < 1e-9 * max(1, abs(z))
    assert abs(dw * db - 1) < 1e-8


@cfg
@given(kappas, seeds, upper)
def test_reverse_flow_invariants(kappa, seed, z):
    a = derive_exponents(kappa).a
    st_ = reverse_point_exact(sample_brownian_driver(1.0, 1e-2, seed, a=a), z)
    t = st_.times
    assert np.all(np.diff(st_.Y) > 0)
    assert np.all(st_.Y**2 <= z.imag**2 + 2 * a * t + 1e-9)
    # |h_t'(z)| <= sqrt(1 + 2at / y^2)
    assert np.all(st_.abs_deriv <= np.sqrt(1 + 2 * a * t / z.imag**2) * (1 + 1e-9))
    assert np.all(np.diff(st_.psi) <= 1e-12)


@cfg
@given(kappas, seeds, upper)
def test_forward_upsilon_monotone(kappa, seed, z):
    a = derive_exponents(kappa).a
    st_ = forward_point(build_chain(sample_brownian_driver(1.0, 1e-2, seed, a=a)), z)
    assert np.all(np.diff(st_.upsilon) <= 1e-12 * st_.upsilon[0])
    assert np.all(np.diff(st_.Y) <= 1e-12)


@cfg
@given(kappas, seeds, st.integers(1, 99))
def test_hcap_additive(kappa, seed, k):
    a = derive_exponents(kappa).a
    ch = build_chain(sample_brownian_driver(1.0, 1e-2, seed, a=a))
    assert abs(ch.hcap(k) + (ch.hcap() - ch.hcap(k)) - a * 1.0) < 1e-12
    assert abs(ch.hcap() - a) < 1e-12


@cfg
@given(seeds, st.sampled_from([1, 2, 3, 5]))
def test_reverse_driver_involution(seed, k):
    d = sample_brownian_driver(1.0, 0.01, seed)
    U, _ = reverse_driver(d, 0.01 * k)
    UU, _ = reverse_driver(U, 0.01 * k)
    assert np.allclose(UU.values, d.values, atol=1e-12)


@cfg
@given(st.floats(0.1, 3), st.floats(-1, 1), seeds)
def test_diffusion_pathwise(q, r, seed):
    if q + r - 0.5 <= 0:
        r = 1.0
    p = simulate_K(q, r, "original", 2.0, 1e-2, seed)
    t = p.times
    assert np.all(np.abs(p.L) <= t + 1e-12)
    assert np.all(np.diff(p.sigma) > 0)
    assert np.all(p.sigma >= np.expm1(2 * p.a * t) / (2 * p.a) * (1 - 1e-9))


@cfg
@given(kappas, seeds)
def test_derivative_sum_monotone(kappa, seed):
    a = derive_exponents(kappa).a
    s = tau_derivative_sum(sample_brownian_driver(1.0, 1 / 128, seed, a=a), 32)
    assert s.is_monotone and np.all(np.diff(s.taus) > 0)


@cfg
@given(seeds, st.floats(0.25, 4.0))
def test_brownian_scaling_of_driver(seed, r):
    d = sample_brownian_driver(1.0, 0.01, seed)
    scaled = DrivingPath(0.01 * r * r, r * d.values)
    assert scaled.T == pytest.approx(r * r)
    assert np.allclose(np.diff(scaled.values) / math.sqrt(scaled.dt), np.diff(d.values) / math.sqrt(d.dt))
