import math

import numpy as np
import pytest
from scipy import integrate

from sle_lab.diffusion import (
    KPath,
    a_of,
    concentration_tail,
    drift_coefficient,
    envelope_check,
    exp_moment_check,
    hitting_split,
    hitting_split_mc,
    invariant_cdf,
    invariant_density,
    n_martingale_check,
    sample_invariant,
    simulate_K,
    simulate_K_ensemble,
    split_phi,
    stationarity_check,
)
from sle_lab.params import DomainError, mu_of_q


def test_drift_regimes():
    assert drift_coefficient(1.0, 0.5, "original") == pytest.approx(-1.0)
    assert drift_coefficient(1.0, 0.5, "weighted") == pytest.approx(-0.5)
    with pytest.raises(DomainError):
        drift_coefficient(1.0, 0.5, "other")


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
def test_invariant_density_normalised(q):
    val, _ = integrate.quad(lambda x: invariant_density(q, x), -np.inf, np.inf, epsabs=1e-12)
    assert abs(val - 1) < 1e-8


def test_invariant_density_special_cases():
    xs = np.linspace(-4, 4, 9)
    assert np.allclose(invariant_density(0.5, xs), 1 / (math.pi * (xs**2 + 1)), rtol=1e-13)
    assert np.allclose(invariant_density(1.0, xs), 0.5 * (xs**2 + 1) ** -1.5, rtol=1e-13)
    with pytest.raises(DomainError):
        invariant_density(0.0, 1.0)


def test_invariant_tail_exponent():
    q = 1.5
    big = np.array([1e3, 1e4, 1e5])
    scaled = invariant_density(q, big) * big ** (2 * q + 1)
    assert np.allclose(scaled, scaled[-1], rtol=1e-5)


def test_invariant_cdf_matches_quadrature():
    for q in (0.5, 1.0, 2.0):
        for x in (-2.0, 0.0, 0.7, 3.0):
            val, _ = integrate.quad(lambda s: invariant_density(q, s), -np.inf, x, epsabs=1e-12)
            assert invariant_cdf(q, x) == pytest.approx(val, abs=1e-9)


def test_sample_invariant_law():
    from scipy import stats

    s = sample_invariant(1.0, 20000, seed=3)
    assert stats.kstest(s, lambda x: invariant_cdf(1.0, x)).statistic < 0.015


def test_hitting_split_trivial_and_cauchy():
    assert hitting_split(1.0, 0.0, 2.0) == 0.0
    assert hitting_split(1.0, 2.0, 2.0) == pytest.approx(1.0)
    assert hitting_split(0.5, 0.6, 2.0) == pytest.approx(0.3, abs=1e-12)
    assert split_phi(1.5, 1.0) == pytest.approx(4 / 3)
    with pytest.raises(DomainError):
        hitting_split(1.0, 3.0, 2.0)


def test_hitting_split_monte_carlo():
    es = hitting_split_mc(0.5, 0.5, 1.5, n_paths=10000, dt=1e-3, seed=1)
    assert es.target == pytest.approx(1 / 3)
    assert abs(es.mean - es.target) < 4 * es.stderr + 0.01


def test_simulate_K_small_time_limit():
    p = simulate_K(1.0, 1.0, "weighted", T=0.01, dt=1e-4, seed=0)
    assert isinstance(p, KPath)
    assert abs(p.K[-1]) < 0.5
    assert p.L[-1] == pytest.approx(-0.01, abs=2e-3)


def test_simulate_K_pathwise_invariants():
    for regime in ("weighted", "original"):
        p = simulate_K(1.0, 1.0, regime, T=5.0, dt=1e-3, seed=4)
        t = p.times
        assert p.violations == 0
        assert np.all(np.abs(p.L) <= t + 1e-12)
        a = p.a
        assert np.all(p.sigma >= np.expm1(2 * a * t) / (2 * a) * (1 - 1e-9))
        assert np.all(np.diff(p.sigma) > 0)


def test_simulate_K_deterministic_and_csv(tmp_path):
    p1 = simulate_K(0.5, 1.0, "weighted", 1.0, 1e-3, seed=9)
    p2 = simulate_K(0.5, 1.0, "weighted", 1.0, 1e-3, seed=9)
    assert np.array_equal(p1.K, p2.K) and np.array_equal(p1.L, p2.L)
    p1.to_csv(tmp_path / "k.csv")
    assert (tmp_path / "k.csv").read_text().splitlines()[0] == "t,k,l,sigma"


def test_ensemble_independent_of_chunking():
    kw = dict(q=1.0, r=1.0, regime="weighted", T=0.5, dt=1e-3, seed=2, n_paths=30)
    r1 = simulate_K_ensemble(chunk=7, jobs=1, **kw)
    r2 = simulate_K_ensemble(chunk=30, jobs=2, **kw)
    assert np.array_equal(r1["K"], r2["K"]) and np.array_equal(r1["L"], r2["L"])
    full = simulate_K(1.0, 1.0, "weighted", 0.5, 1e-3, seed=2, index=5)
    assert r1["K"][5, -1] == full.K[-1]


def test_exp_moment_delta_zero_trivial():
    rep = exp_moment_check(1.0, 0.0, 1.0, n_paths=200, seed=0)
    assert rep["target"] == 1.0
    assert np.allclose(rep["estimate"], 1.0)


def test_exp_moment_identity():
    rep = exp_moment_check(1.0, 0.5, 1.0, n_paths=20000, seed=1)
    assert rep["violations"] == 0
    assert abs(rep["zscore"]) < 3.5


def test_n_martingale():
    rep = n_martingale_check(1.0, 1.0, 1.0, n_paths=10000, seed=2)
    assert rep["target"] == 1.0
    assert abs(rep["zscore"]) < 3.5
    assert "half_dt" in rep


def test_stationarity_small():
    rep = stationarity_check(1.0, n_paths=4000, dt=1e-2, seed=3, snapshots=3)
    assert rep["ks_distance"] < 0.03
    assert rep["target"] == pytest.approx(mu_of_q(1.0)) == pytest.approx(-1 / 3)
    assert abs(rep["zscore"]) < 3.5
    h = rep["histogram"]
    assert len(h["centres"]) == 50


def test_concentration_tail_decreasing():
    rep = concentration_tail(1.0, 4.0, [0.5, 1, 2, 3], n_paths=2000, seed=1)
    assert np.all(np.diff(rep["tail"]) <= 0)
    assert np.all(rep["tail"] <= rep["c_fit"] * np.exp(-rep["alphas"]) + 1e-12)


def test_envelope_check():
    assert envelope_check(1.0, 1.0, 0.0, n_paths=10)["coverage"] == 1.0
    rep = envelope_check(1.0, 1.0, 5.0, n_paths=300, dt=1e-2, seed=1)
    assert math.isfinite(rep["c_star"])
    assert np.all(np.diff(rep["coverage_curve"]) >= 0)
    assert rep["coverage_curve"][-1] == 1.0


def test_a_of():
    assert a_of(1.0, 1.0) == pytest.approx(0.75)
