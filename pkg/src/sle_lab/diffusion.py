"""The radial diffusion ``K_t`` of the time-changed reverse flow.

``K`` solves ``dK = b K dt + sqrt(K^2 + 1) dB`` where the drift coefficient
is ``b = 1/2 - q - r`` in the original measure and ``b = 1/2 - q`` in the
measure weighted by the ``N_t`` martingale.  Along a path we accumulate

    L_t = int_0^t (K^2 - 1)/(K^2 + 1) ds,
    sigma(t) = int_0^t e^{2as} (K^2 + 1) ds,    2a = q + r - 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from ._kernels import k_advance
from .driving import grid_steps, path_rng
from .ensemble import concat, map_chunks
from .params import DomainError, moment_pair, mu_of_q
from .stats import EnsembleStats

REGIMES = ("original", "weighted")
SCHEMES = ("euler", "lamperti")


def drift_coefficient(q: float, r: float, regime: str) -> float:
    if regime == "original":
        return 0.5 - q - r
    if regime == "weighted":
        return 0.5 - q
    raise DomainError(f"regime must be one of {REGIMES}, got {regime!r}")


def a_of(q: float, r: float) -> float:
    return 0.5 * (q + r - 0.5)


@dataclass(frozen=True)
class KPath:
    dt: float
    K: np.ndarray
    L: np.ndarray
    sigma: np.ndarray
    regime: str
    q: float
    r: float
    violations: int = 0

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.K.size)

    @property
    def a(self) -> float:
        return a_of(self.q, self.r)

    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.K, self.L, self.sigma])
        np.savetxt(path, data, delimiter=",", header="t,k,l,sigma", comments="", fmt="%.17g")


def _k_chunk(indices, *, seed, n_steps, dt, b, a, x0, lamperti, record, block):
    """Run the paths in ``indices``; values at the step numbers in ``record``."""
    P = len(indices)
    m = record.size
    K = np.full(P, float(x0))
    L = np.zeros(P)
    S = np.zeros(P)
    Kr, Lr, Sr = np.empty((P, m)), np.empty((P, m)), np.empty((P, m))
    at0 = record == 0
    Kr[:, at0], Lr[:, at0], Sr[:, at0] = float(x0), 0.0, 0.0
    viol = np.zeros(P, dtype=np.int64)
    rngs = [path_rng(seed, i) for i in indices]
    done = 0
    while done < n_steps:
        nb = min(block, n_steps - done)
        normals = np.stack([g.standard_normal(nb) for g in rngs])
        sel = (record > done) & (record <= done + nb)
        cols = np.flatnonzero(sel)
        kr, lr, sr = np.empty((P, cols.size)), np.empty((P, cols.size)), np.empty((P, cols.size))
        k_advance(K, L, S, done * dt, dt, normals, b, a, lamperti, record[cols] - done, kr, lr, sr, viol)
        Kr[:, cols], Lr[:, cols], Sr[:, cols] = kr, lr, sr
        done += nb
    return {"K": Kr, "L": Lr, "sigma": Sr, "violations": viol}


def simulate_K_ensemble(
    q: float,
    r: float,
    regime: str,
    T: float,
    dt: float,
    seed: int,
    n_paths: int,
    x0: float = 0.0,
    record_times=None,
    scheme: str = "euler",
    jobs: int | None = None,
    chunk: int = 2000,
    block: int = 4096,
) -> dict:
    """Independent paths of ``K``; arrays of shape ``(n_paths, len(record_times))``.

    ``record_times`` defaults to ``[T]``.  Path ``i`` uses the stream
    ``(seed, i)`` so results do not depend on ``chunk`` or ``jobs``.
    """
    if scheme not in SCHEMES:
        raise DomainError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    b = drift_coefficient(q, r, regime)
    n = grid_steps(T, dt)
    times = np.array([T] if record_times is None else record_times, dtype=float)
    record = np.rint(times / dt).astype(np.int64)
    if np.any(np.abs(record * dt - times) > 1e-9 * max(1.0, T)) or np.any(np.diff(record) < 0):
        raise DomainError("record_times must be sorted grid times")
    res = map_chunks(
        _k_chunk, n_paths, chunk, jobs,
        seed=seed, n_steps=n, dt=dt, b=b, a=a_of(q, r), x0=x0,
        lamperti=scheme == "lamperti", record=record, block=block,
    )
    out = {key: concat(res, key) for key in ("K", "L", "sigma", "violations")}
    out["times"] = times
    return out


def simulate_K(
    q: float, r: float, regime: str, T: float, dt: float, seed: int,
    x0: float = 0.0, index: int = 0, scheme: str = "euler",
) -> KPath:
    """One Euler-Maruyama path with ``L`` and ``sigma`` on the full grid."""
    n = grid_steps(T, dt)
    res = _k_chunk(
        [index], seed=seed, n_steps=n, dt=dt, b=drift_coefficient(q, r, regime),
        a=a_of(q, r), x0=x0, lamperti=scheme == "lamperti",
        record=np.arange(n + 1), block=4096,
    )
    return KPath(dt, res["K"][0], res["L"][0], res["sigma"][0], regime, q, r, int(res["violations"][0]))


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _check_q(q: float) -> None:
    if not q > 0:
        raise DomainError(f"q must be positive, got {q!r}")


def invariant_density(q: float, x):
    """``u_q(x) = Gamma(q+1/2) / (Gamma(1/2) Gamma(q)) (x^2+1)^{-(q+1/2)}``."""
    _check_q(q)
    x = np.asarray(x, dtype=float)
    logc = special.gammaln(q + 0.5) - special.gammaln(0.5) - special.gammaln(q)
    return np.exp(logc - (q + 0.5) * np.log1p(x * x))


def invariant_cdf(q: float, x):
    """CDF of ``u_q``: ``sqrt(2q) K`` is Student-t with ``2q`` degrees of freedom."""
    _check_q(q)
    return stats.t.cdf(np.sqrt(2.0 * q) * np.asarray(x, dtype=float), df=2.0 * q)


def sample_invariant(q: float, size: int, seed: int) -> np.ndarray:
    _check_q(q)
    rng = path_rng(seed, 0)
    return rng.standard_t(2.0 * q, size) / math.sqrt(2.0 * q)


def split_phi(q: float, x: float) -> float:
    """``phi(x) = int_0^|x| (s^2+1)^{q-1/2} ds``."""
    val, _ = integrate.quad(lambda s: (s * s + 1.0) ** (q - 0.5), 0.0, abs(x), epsabs=1e-13, epsrel=1e-12)
    return val


def hitting_split(q: float, x: float, y: float) -> float:
    """``P^x{K_rho^2 = y^2}`` for the weighted dynamics, ``rho`` the exit of ``0 < K^2 < y^2``."""
    _check_q(q)
    if not (y > 0 and abs(x) <= y):
        raise DomainError("need 0 <= |x| <= y")
    return split_phi(q, x) / split_phi(q, y)


def hitting_split_mc(
    q: float, x: float, y: float, n_paths: int, dt: float, seed: int, block: int = 2048
) -> EnsembleStats:
    """Monte Carlo estimate of :func:`hitting_split` by simulated exits."""
    b = 0.5 - q
    rngs = [path_rng(seed, i) for i in range(n_paths)]
    K = np.full(n_paths, float(x))
    alive = np.ones(n_paths, dtype=bool)
    hit_top = np.zeros(n_paths, dtype=bool)
    sq = math.sqrt(dt)
    # zero start exits immediately
    if x == 0:
        alive[:] = False
    while alive.any():
        idx = np.flatnonzero(alive)
        normals = np.stack([rngs[i].standard_normal(block) for i in idx])
        k = K[idx]
        live = np.ones(idx.size, dtype=bool)
        for j in range(block):
            step = b * k * dt + np.sqrt(k * k + 1.0) * sq * normals[:, j]
            k = np.where(live, k + step, k)
            top = live & (k * k >= y * y)
            bottom = live & (np.sign(k) != np.sign(x))
            hit_top[idx[top]] = True
            live &= ~(top | bottom)
            if not live.any():
                break
        K[idx] = k
        alive[idx] = live
    return EnsembleStats.from_samples(hit_top.astype(float), hitting_split(q, x, y), dt)


# ---------------------------------------------------------------------------
# Monte Carlo checks
# ---------------------------------------------------------------------------

def _report(statistic: str, es: EnsembleStats, **extra) -> dict:
    out = {
        "statistic": statistic,
        "estimate": es.mean,
        "stderr": es.stderr,
        "target": es.target,
        "zscore": es.zscore,
        "n_paths": es.n_paths,
        "dt": es.dt,
    }
    out.update(extra)
    return out


def exp_moment_check(
    q: float, delta: float, t: float, n_paths: int, dt: float = 1e-3, seed: int = 0,
    x0: float = 0.0, r: float = 1.0, scheme: str = "euler", jobs: int | None = None,
) -> dict:
    """``E^x[e^{pL_t}(K_t^2+1)^{delta/2}]`` against ``(x^2+1)^{delta/2} e^{t(delta/2 - p)}``."""
    _check_q(q)
    mp = moment_pair(delta, q)
    res = simulate_K_ensemble(q, r, "weighted", t, dt, seed, n_paths, x0=x0, scheme=scheme, jobs=jobs)
    K, L = res["K"][:, -1], res["L"][:, -1]
    samples = np.exp(mp.p * L) * (K * K + 1.0) ** (delta / 2)
    target = (x0 * x0 + 1.0) ** (delta / 2) * math.exp(t * (delta / 2 - mp.p))
    es = EnsembleStats.from_samples(samples, target, dt)
    return _report(
        "exp_moment", es, q=q, delta=delta, p=mp.p, t=t, x0=x0, delta_valid=mp.valid,
        violations=int(res["violations"].sum()), passed=es.passes(),
    )


def n_martingale_values(q: float, r: float, K, L, t: float):
    theta = r / 2 + q * r + r * r / 2
    return np.exp(theta * (L - t) / 2 + (theta - r / 2) * t) * (K * K + 1.0) ** (r / 2)


def n_martingale_check(
    q: float, r: float, t: float, n_paths: int, dt: float = 1e-3, seed: int = 0,
    x0: float = 0.0, scheme: str = "euler", jobs: int | None = None,
) -> dict:
    """Mean of ``N_t`` in the original regime against ``(x0^2+1)^{r/2}``.

    The same ensemble is rerun at ``dt/2`` to show the discretization bias.
    """
    _check_q(q)
    target = (x0 * x0 + 1.0) ** (r / 2)
    levels = []
    for h in (dt, dt / 2):
        res = simulate_K_ensemble(q, r, "original", t, h, seed, n_paths, x0=x0, scheme=scheme, jobs=jobs)
        vals = n_martingale_values(q, r, res["K"][:, -1], res["L"][:, -1], t)
        levels.append((EnsembleStats.from_samples(vals, target, h), int(res["violations"].sum())))
    es, viol = levels[0]
    es2, viol2 = levels[1]
    return _report(
        "n_martingale", es, q=q, r=r, t=t, x0=x0, violations=viol + viol2,
        half_dt={"estimate": es2.mean, "stderr": es2.stderr, "zscore": es2.zscore},
        passed=es.passes(),
    )


def stationarity_check(
    q: float, n_paths: int, dt: float = 1e-2, seed: int = 0, burn_in: float | None = None,
    snapshots: int = 1, spacing: float | None = None, scheme: str = "euler", r: float = 1.0,
    jobs: int | None = None,
) -> dict:
    """KS distance of post-burn-in ``K`` to ``u_q`` and the ergodic mean of ``L``.

    Each path is sampled ``snapshots`` times, at the end of the burn-in
    (``10/q`` by default) and then every ``spacing`` (default ``2/q``).  The
    increment of ``L`` between the first and last snapshot, divided by the
    elapsed time, estimates ``mu``.
    """
    _check_q(q)
    burn = 10.0 / q if burn_in is None else burn_in
    spacing = 2.0 / q if spacing is None else spacing
    burn = dt * math.ceil(burn / dt - 1e-9)
    step = dt * max(1, round(spacing / dt))
    times = burn + step * np.arange(max(1, snapshots))
    if snapshots < 2:
        times = np.array([burn, burn + step])
    total = float(times[-1])
    res = simulate_K_ensemble(
        q, r, "weighted", total, dt, seed, n_paths, record_times=times, scheme=scheme, jobs=jobs
    )
    samples = res["K"][:, : max(1, snapshots)].ravel()
    ks = stats.kstest(samples, lambda x: invariant_cdf(q, x))
    edges = np.linspace(-5.0, 5.0, 51)
    counts, _ = np.histogram(samples, bins=edges)
    centres = 0.5 * (edges[1:] + edges[:-1])
    hist = {"centres": centres, "density": counts / (samples.size * np.diff(edges)),
            "u_q": invariant_density(q, centres)}
    rate = (res["L"][:, -1] - res["L"][:, 0]) / (total - burn)
    es = EnsembleStats.from_samples(rate, mu_of_q(q), dt)
    return _report(
        "ergodic_L_rate", es, q=q, burn_in=burn, window=total - burn, ks_distance=float(ks.statistic),
        ks_pvalue=float(ks.pvalue), n_samples=int(samples.size), histogram=hist,
        violations=int(res["violations"].sum()), passed=bool(ks.statistic < 0.02 and es.passes()),
    )


def concentration_tail(
    q: float, t: float, alphas, n_paths: int, dt: float = 1e-2, seed: int = 0,
    scheme: str = "euler", jobs: int | None = None,
) -> dict:
    """Empirical ``P{|L_t - mu t| >= alpha sqrt(t)}`` and the smallest ``c`` with tail ``<= c e^{-alpha}``."""
    _check_q(q)
    res = simulate_K_ensemble(q, 1.0, "weighted", t, dt, seed, n_paths, scheme=scheme, jobs=jobs)
    dev = np.abs(res["L"][:, -1] - mu_of_q(q) * t) / math.sqrt(t)
    alphas = np.asarray(alphas, dtype=float)
    tail = np.array([(dev >= al).mean() for al in alphas])
    c_fit = float(np.max(tail * np.exp(alphas)))
    return {"statistic": "concentration", "q": q, "t": t, "alphas": alphas, "tail": tail, "c_fit": c_fit,
            "n_paths": n_paths, "violations": int(res["violations"].sum())}


def envelope_check(
    q: float, u: float, T: float, n_paths: int, dt: float = 1e-2, seed: int = 0,
    coverage: float = 0.9, scheme: str = "euler", jobs: int | None = None,
) -> dict:
    """Smallest ``c_*`` for which a fraction ``coverage`` of paths satisfy both envelopes.

    A path is covered by ``c`` when ``|L_s - mu s| <= c (s+2)^{1/2} log(s+2)``
    and ``K_s^2 + 1 <= c min{(s+1)^u, (T-s+1)^u}`` for every grid ``s <= T``.
    """
    _check_q(q)
    if T == 0:
        return {"statistic": "envelope", "q": q, "u": u, "T": 0.0, "c_star": 0.0, "coverage": 1.0,
                "c_grid": [], "coverage_curve": [], "n_paths": n_paths, "violations": 0}
    n = grid_steps(T, dt)
    s = dt * np.arange(n + 1)
    res = simulate_K_ensemble(q, 1.0, "weighted", T, dt, seed, n_paths, record_times=s, scheme=scheme, jobs=jobs)
    K, L = res["K"], res["L"]
    mu = mu_of_q(q)
    cL = np.max(np.abs(L - mu * s) / (np.sqrt(s + 2) * np.log(s + 2)), axis=1)
    env = np.minimum((s + 1) ** u, (T - s + 1) ** u)
    cK = np.max((K * K + 1.0) / env, axis=1)
    need = np.maximum(cL, cK)
    c_star = float(np.quantile(need, coverage, method="higher"))
    grid = np.quantile(need, np.linspace(0.5, 1.0, 11))
    curve = np.array([(need <= c).mean() for c in grid])
    return {
        "statistic": "envelope", "q": q, "u": u, "T": T, "c_star": c_star, "coverage": coverage,
        "c_grid": grid, "coverage_curve": curve, "n_paths": n_paths,
        "violations": int(res["violations"].sum()),
    }
