"""Monte Carlo checks of the conformal-map martingales and moment laws.

Reverse-flow ensembles use the exact frozen-step flow of
:func:`sle_lab.loewner.reverse_flow_paths`; forward ensembles use the slit
chain through :func:`sle_lab.loewner.forward_flow_paths`.  Each path draws its
driver from the stream ``(seed, path_index)``.  When a test runs at several
step sizes the finer drivers are Brownian-bridge refinements of the coarse
one, so step-size effects are measured on coupled paths.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, stats

from ._kernels import theta_advance, theta_survival
from .driving import brownian_on_grid, grid_steps, path_rng
from .ensemble import map_chunks
from .loewner import forward_flow_paths, reverse_flow_paths
from .params import DomainError, dimension, lambda_of_r, supermartingale_condition, upper_bound_r_max, y_exponent
from .stats import EnsembleStats, RunningMoments, ols_fit

THETA_CLIP = 1e-6


def _check_upper(z) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise DomainError(f"z must lie in the upper half-plane, got {z!r}")
    return z


def _grid_indices(times, dt: float) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    idx = np.rint(times / dt).astype(np.int64)
    if np.any(np.abs(idx * dt - times) > 1e-9 * np.maximum(1.0, times)):
        raise DomainError(f"times {times.tolist()} are not multiples of dt={dt!r}")
    return idx


def ensemble_record(name: str, params: dict, t, es: EnsembleStats, clip_count: int = 0, **extra) -> dict:
    """Flat JSON-ready report for one ensemble statistic."""
    out = {
        "test": name,
        "params": params,
        "t": t,
        "estimate": es.mean,
        "stderr": es.stderr,
        "target": es.target,
        "zscore": es.zscore,
        "dt": es.dt,
        "n_paths": es.n_paths,
        "clip_count": int(clip_count),
    }
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# reverse-flow martingale
# ---------------------------------------------------------------------------

def martingale_values(Z, log_abs_deriv, r: float, a: float):
    """``M = |h'|^lambda Y^{r - r^2/4a} (R^2 + 1)^{r/2}`` elementwise."""
    Z = np.asarray(Z)
    X, Y = Z.real, Z.imag
    lam = lambda_of_r(r, a)
    R2 = (X / Y) ** 2
    return np.exp(lam * np.asarray(log_abs_deriv) + y_exponent(r, a) * np.log(Y) + 0.5 * r * np.log1p(R2))


def reverse_martingale_value(state, r: float, a: float | None = None, t: float | None = None) -> float:
    """``M_t`` for a reverse-flow state (last recorded time by default)."""
    a = state.a if a is None else a
    k = -1 if t is None else state.at(t)
    return float(martingale_values(state.Z[k], state.log_abs_deriv[k], r, a))


def _reverse_chunk(indices, *, seed, steps, a, z, records, levels):
    """Reverse flow at ``levels + 1`` coupled resolutions for the paths in ``indices``."""
    rows = [brownian_on_grid(seed, i, steps, levels) for i in indices]
    out = {}
    viol = np.zeros(len(indices), dtype=np.int64)
    for lev in range(levels + 1):
        U = np.stack([r[lev] for r in rows])
        h = np.repeat(steps / 2**lev, 2**lev)
        Z, L, v = reverse_flow_paths(U, h, a, z, records[lev])
        out[f"Z{lev}"], out[f"L{lev}"] = Z, L
        viol += v
    out["violations"] = viol
    return out


def reverse_ensemble(
    a: float, z: complex, steps, record_steps, n_paths: int, seed: int, levels: int = 0,
    jobs: int | None = None, chunk: int = 500,
) -> dict:
    """``Z`` and ``log|h'|`` for ``n_paths`` reverse flows on the grid ``steps``.

    ``record_steps`` are indices into the coarse grid.  Level ``k`` results
    (keys ``Z{k}``, ``L{k}``) come from the ``k``-fold bridge refinement.
    """
    z = _check_upper(z)
    steps = np.asarray(steps, dtype=float)
    rec = np.asarray(record_steps, dtype=np.int64)
    records = [rec * 2**lev for lev in range(levels + 1)]
    res = map_chunks(
        _reverse_chunk, n_paths, chunk, jobs,
        seed=seed, steps=steps, a=a, z=z, records=records, levels=levels,
    )
    return {k: np.concatenate([r[k] for r in res]) for k in res[0]}


def halving_report(vals, target: float) -> list[dict]:
    """Step-size diagnostics from coupled values ``vals[k]`` at ``dt / 2^k``.

    ``diff[k] = mean(vals[k] - vals[k+1])`` measures the change of the bias
    from level ``k`` to ``k+1`` on common paths, so it is far more precise
    than either mean.  The bias is shrinking when successive differences do
    not grow: ``|diff[k+1]| <= |diff[k]| + 3 stderr``.  With a single
    halving the only requirement is that the finer mean is not significantly
    further from the target.
    """
    diffs = [RunningMoments.of(vals[k] - vals[k + 1]) for k in range(len(vals) - 1)]
    out = []
    for k, dm in enumerate(diffs):
        se = dm.stderr if dm.count > 1 else 0.0
        row = {"coupled_diff": dm.mean, "coupled_stderr": se}
        if k + 1 < len(diffs):
            nxt = diffs[k + 1]
            nse = nxt.stderr if nxt.count > 1 else 0.0
            row["ok"] = bool(abs(nxt.mean) <= abs(dm.mean) + 3 * nse + 1e-15)
        elif len(diffs) == 1:
            m0, m1 = float(np.mean(vals[0])), float(np.mean(vals[1]))
            row["ok"] = bool(abs(m1 - target) <= abs(m0 - target) + 3 * se + 1e-15)
        out.append(row)
    return out


def martingale_conservation_test(
    r: float, a: float, z: complex, t_list, n_paths: int, dt: float = 1e-3, seed: int = 0,
    halvings: int = 2, jobs: int | None = None,
) -> dict:
    """Ensemble mean of ``M_t`` against ``M_0`` at each ``t``, at ``dt`` and halved steps.

    A time passes when ``|zscore| <= 3`` at ``dt`` and
    :func:`halving_report` finds the bias shrinking.
    """
    z = _check_upper(z)
    t_list = np.asarray(t_list, dtype=float)
    T = float(t_list.max())
    n = grid_steps(T, dt)
    rec = _grid_indices(t_list, dt)
    res = reverse_ensemble(a, z, np.full(n, dt), rec, n_paths, seed, halvings, jobs)
    target = float(martingale_values(z, 0.0, r, a))
    rows = []
    for j, t in enumerate(t_list):
        vals = [martingale_values(res[f"Z{lev}"][:, j], res[f"L{lev}"][:, j], r, a) for lev in range(halvings + 1)]
        per = [EnsembleStats.from_samples(v, target, dt / 2**lev) for lev, v in enumerate(vals)]
        shrink = halving_report(vals, target)
        passed = per[0].passes() and all(h.get("ok", True) for h in shrink)
        rows.append(ensemble_record(
            "martingale_conservation", {"r": r, "a": a, "z": z}, float(t), per[0],
            levels=[p.to_dict() for p in per], halving=shrink, passed=bool(passed),
        ))
    return {
        "test": "martingale_conservation",
        "params": {"r": r, "a": a, "z": z, "dt": dt, "n_paths": n_paths, "seed": seed},
        "target": target,
        "rows": rows,
        "violations": int(res["violations"].sum()),
        "passed": all(row["passed"] for row in rows),
    }


def supermartingale_check(
    theta: float, delta: float, a: float, z: complex, t: float, n_paths: int, dt: float = 1e-3,
    seed: int = 0, jobs: int | None = None,
) -> dict:
    """One-sided check ``E[N_t] <= N_0 + 3 stderr`` for ``N = M Y^{-theta}(R^2+1)^{delta/2}``.

    ``M`` is the ``r = 1`` martingale.  Parameter pairs outside
    ``2 a theta >= max(delta, delta - 4 a delta + delta^2)`` are rejected.
    """
    z = _check_upper(z)
    if not a > 0.25:
        raise DomainError("the supermartingale check needs a > 1/4")
    if not supermartingale_condition(theta, delta, a):
        raise DomainError(
            f"(theta={theta!r}, delta={delta!r}) violates 2a*theta >= max(delta, delta - 4a*delta + delta^2)"
        )
    n = grid_steps(t, dt)
    res = reverse_ensemble(a, z, np.full(n, dt), [n], n_paths, seed, 0, jobs)

    def value(Z, L):
        Z = np.asarray(Z)
        return martingale_values(Z, L, 1.0, a) * Z.imag ** (-theta) * (1.0 + (Z.real / Z.imag) ** 2) ** (delta / 2)

    N0 = float(value(z, 0.0))
    es = EnsembleStats.from_samples(value(res["Z0"][:, 0], res["L0"][:, 0]), N0, dt)
    return ensemble_record(
        "supermartingale", {"theta": theta, "delta": delta, "a": a, "z": z}, t, es,
        violations=int(res["violations"].sum()), passed=bool(es.mean <= N0 + 3 * es.stderr),
    )


def minimal_theta(delta: float, a: float) -> float:
    """Smallest ``theta`` satisfying the supermartingale condition."""
    return max(delta, delta - 4 * a * delta + delta * delta) / (2 * a)


# ---------------------------------------------------------------------------
# derivative moments
# ---------------------------------------------------------------------------

def moment_grid(t_list, dt: float, growth: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-uniform steps reaching every time in ``t_list`` exactly.

    On ``[t_i, t_{i+1}]`` the step is about ``dt (1 + t_i)`` when ``growth``
    is set; the flow's natural scale ``Y_t^2`` grows linearly, so this keeps
    the relative step size roughly constant.  Returns the steps and the grid
    index of each time.
    """
    t_list = np.asarray(t_list, dtype=float)
    if np.any(np.diff(t_list) <= 0) or t_list[0] <= 0:
        raise DomainError("t_list must be positive and increasing")
    steps, idx, prev, count = [], [], 0.0, 0
    for t in t_list:
        span = t - prev
        h = dt * (1.0 + prev) if growth else dt
        k = max(1, int(math.ceil(span / h - 1e-9)))
        steps.append(np.full(k, span / k))
        count += k
        idx.append(count)
        prev = t
    return np.concatenate(steps), np.array(idx, dtype=np.int64)


def derivative_moment_estimate(
    lam: float, a: float, t_list, n_paths: int, dt: float = 2e-3, seed: int = 0,
    z: complex = 1j, jobs: int | None = None,
) -> dict:
    """``E|h_t'(z)|^lambda`` at each ``t`` and the log-log slope over ``t_list``."""
    z = _check_upper(z)
    steps, rec = moment_grid(t_list, dt)
    res = reverse_ensemble(a, z, steps, rec, n_paths, seed, 0, jobs)
    rows, logs, weights = [], [], []
    for j, t in enumerate(np.asarray(t_list, dtype=float)):
        vals = np.exp(lam * res["L0"][:, j])
        es = EnsembleStats.from_samples(vals, math.nan, float(np.max(steps)))
        rows.append({"t": float(t), "estimate": es.mean, "stderr": es.stderr, "n_paths": es.n_paths})
        logs.append(math.log(es.mean))
        weights.append((es.mean / es.stderr) ** 2 if es.stderr > 0 else 1.0)
    fit = ols_fit(np.log(t_list), logs)
    return {
        "test": "derivative_moment",
        "params": {"lambda": lam, "a": a, "z": z, "dt": dt, "n_paths": n_paths, "seed": seed},
        "rows": rows,
        "fit": fit.to_dict(),
        "slope": fit.slope,
        "violations": int(res["violations"].sum()),
    }


def upper_bound_trend(
    a: float, r: float, x: float, s_list, n_paths: int, dt: float = 2e-3, seed: int = 0,
    jobs: int | None = None,
) -> dict:
    """``E[|h'_{s^2}(x+i)|^lambda (R^2+1)^{r/2}] (s+1)^{r - r^2/4a}`` over ``s``.

    Report only: the values should stay bounded.  ``r`` must lie in the
    admissible range ``0 <= r < 6a - 2 sqrt(5a^2 - a)`` (``a >= 1/4``).
    """
    if not (a >= 0.25 and 0 <= r < upper_bound_r_max(a)):
        raise DomainError(f"r={r!r} is outside the admissible range for a={a!r}")
    s_list = np.asarray(s_list, dtype=float)
    steps, rec = moment_grid(s_list**2, dt)
    res = reverse_ensemble(a, complex(x, 1.0), steps, rec, n_paths, seed, 0, jobs)
    lam = lambda_of_r(r, a)
    vals = []
    for j, s in enumerate(s_list):
        Z, L = res["Z0"][:, j], res["L0"][:, j]
        m = np.exp(lam * L) * (1.0 + (Z.real / Z.imag) ** 2) ** (r / 2)
        vals.append(float(m.mean()) * (s + 1) ** y_exponent(r, a))
    vals = np.array(vals)
    return {"test": "upper_bound_trend", "params": {"a": a, "r": r, "x": x}, "s": s_list,
            "scaled_moment": vals, "spread": float(vals.max() / vals.min()),
            "violations": int(res["violations"].sum())}


# ---------------------------------------------------------------------------
# Green's function
# ---------------------------------------------------------------------------

def green_function(z: complex, a: float) -> float:
    """``G(y(x+i)) = y^{d-2} (x^2+1)^{1/2-2a}``."""
    z = _check_upper(z)
    y = z.imag
    x = z.real / y
    return y ** (dimension(a) - 2) * (x * x + 1) ** (0.5 - 2 * a)


def c_star(a: float) -> float:
    """``2 [int_0^pi sin^{4a}]^{-1}`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda th: math.sin(th) ** (4 * a), 0.0, math.pi, epsabs=1e-13, epsrel=1e-12)
    return 2.0 / val


def green_values(Z, log_abs_deriv, a: float):
    """``Upsilon^{d-2} sin^{4a-1} Theta`` and the number of clipped angles."""
    Z = np.asarray(Z)
    theta = np.angle(Z)
    clipped = (theta < THETA_CLIP) | (theta > math.pi - THETA_CLIP)
    power = 4 * a - 1
    if power < 0:
        theta = np.clip(theta, THETA_CLIP, math.pi - THETA_CLIP)
        n_clip = int(clipped.sum())
    else:
        n_clip = 0
    log_ups = np.log(Z.imag) - np.asarray(log_abs_deriv)
    return np.exp((dimension(a) - 2) * log_ups) * np.sin(theta) ** power, n_clip


def _forward_chunk(indices, *, seed, n_steps, dt, a, z, records, levels, floor):
    rows = [brownian_on_grid(seed, i, np.full(n_steps, dt), levels) for i in indices]
    out = {}
    viol = np.zeros(len(indices), dtype=np.int64)
    for lev in range(levels + 1):
        U = np.stack([r[lev] for r in rows])
        Z, L, stop, v = forward_flow_paths(U, dt / 2**lev, a, z, records[lev], floor)
        out[f"Z{lev}"], out[f"L{lev}"], out[f"stop{lev}"] = Z, L, stop
        viol += v
    out["violations"] = viol
    return out


def forward_ensemble(
    a: float, z: complex, n_steps: int, dt: float, record_steps, n_paths: int, seed: int,
    floor: float = 0.0, levels: int = 0, jobs: int | None = None, chunk: int = 500,
) -> dict:
    rec = np.asarray(record_steps, dtype=np.int64)
    records = [rec * 2**lev for lev in range(levels + 1)]
    res = map_chunks(
        _forward_chunk, n_paths, chunk, jobs, seed=seed, n_steps=n_steps, dt=dt, a=a,
        z=_check_upper(z), records=records, levels=levels, floor=floor,
    )
    return {k: np.concatenate([r[k] for r in res]) for k in res[0]}


def green_martingale_test(
    a: float, z: complex, t_list, n_paths: int, dt: float = 1e-3, seed: int = 0,
    floor: float = 1e-3, halvings: int = 2, jobs: int | None = None,
) -> dict:
    """Mean of ``Upsilon^{d-2} sin^{4a-1} Theta`` stopped at ``Upsilon <= floor`` against ``G(z)``."""
    z = _check_upper(z)
    if not a > 0.25:
        raise DomainError("the Green's-function martingale needs a > 1/4")
    t_list = np.asarray(t_list, dtype=float)
    n = grid_steps(float(t_list.max()), dt)
    rec = _grid_indices(t_list, dt)
    res = forward_ensemble(a, z, n, dt, rec, n_paths, seed, floor, halvings, jobs)
    target = green_function(z, a)
    rows = []
    for j, t in enumerate(t_list):
        per, clips, vals = [], 0, []
        for lev in range(halvings + 1):
            v, c = green_values(res[f"Z{lev}"][:, j], res[f"L{lev}"][:, j], a)
            vals.append(v)
            clips += c
            per.append(EnsembleStats.from_samples(v, target, dt / 2**lev))
        shrink = halving_report(vals, target)
        stopped = float(np.mean((res["stop0"] >= 0) & (res["stop0"] <= rec[j])))
        rows.append(ensemble_record(
            "green_martingale", {"a": a, "z": z, "floor": floor}, float(t), per[0], clips,
            levels=[p.to_dict() for p in per], halving=shrink, stopped_fraction=stopped,
            passed=bool(per[0].passes() and all(h.get("ok", True) for h in shrink)),
        ))
    return {"test": "green_martingale", "params": {"a": a, "z": z, "dt": dt, "n_paths": n_paths},
            "target": target, "rows": rows, "violations": int(res["violations"].sum()),
            "passed": all(r["passed"] for r in rows)}


def _theta_chunk(indices, *, seed, theta0, ds, b, n_steps, record):
    normals = np.stack([path_rng(seed, i).standard_normal(n_steps) for i in indices])
    return {"w": theta_survival(normals, theta0, ds, b, record)}


def radial_survival(
    a: float, theta0: float, s_list, n_paths: int, ds: float = 1e-3, seed: int = 0,
    jobs: int | None = None, chunk: int = 2000,
) -> np.ndarray:
    """Per-path survival weights of the radial angle at the times ``s_list``.

    In the radial time ``s`` with ``Upsilon_s = Upsilon_0 e^{-2as}`` the angle
    ``Theta = arg Z`` solves ``dTheta = (1 - 2a) cot(Theta) ds + dW`` and the
    point's evolution ends when ``Theta`` reaches 0 or pi.  Hence
    ``P{Upsilon_inf <= Upsilon_0 e^{-2as}}`` is the probability that the
    angle survives to time ``s``.  Weights include the Brownian-bridge
    probability of staying inside between grid points.
    """
    s_list = np.asarray(s_list, dtype=float)
    record = np.rint(s_list / ds).astype(np.int64)
    n = int(record.max())
    res = map_chunks(
        _theta_chunk, n_paths, chunk, jobs, seed=seed, theta0=float(theta0), ds=ds,
        b=1.0 - 2.0 * a, n_steps=n, record=record,
    )
    return np.concatenate([r["w"] for r in res])


def bm_interval_survival(theta0: float, s: float, terms: int = 200) -> float:
    """Exact survival of standard Brownian motion in ``(0, pi)`` (the ``a = 1/2`` case)."""
    k = np.arange(1, 2 * terms, 2)
    return float(np.sum(4 / (k * math.pi) * np.sin(k * theta0) * np.exp(-k * k * s / 2)))


def one_point_green_estimate(
    a: float, z_list, eps_list, n_paths: int, ds: float = 1e-3, seed: int = 0,
    jobs: int | None = None,
) -> dict:
    """Table of ``P{Upsilon_inf <= eps} / (G(z) eps^{2-d})`` by the radial reduction."""
    d = dimension(a)
    if not d < 2:
        raise DomainError("the one-point estimate needs kappa < 8")
    cs = c_star(a)
    table = []
    for zi, z in enumerate(z_list):
        z = _check_upper(z)
        y = z.imag
        theta0 = math.atan2(z.imag, z.real)
        if np.any(np.asarray(eps_list) >= y):
            raise DomainError("eps must be below Im z")
        s_eps = np.array([math.log(y / e) / (2 * a) for e in eps_list])
        s_eps = ds * np.rint(s_eps / ds)
        order = np.argsort(s_eps)
        w = radial_survival(a, theta0, s_eps[order], n_paths, ds, seed + 7919 * zi, jobs)
        G = green_function(z, a)
        for col, k in enumerate(order):
            eps = float(eps_list[k])
            eps_eff = y * math.exp(-2 * a * s_eps[k])
            scale = G * eps_eff ** (2 - d)
            mom = RunningMoments.of(w[:, col])
            row = {"z": z, "eps": eps, "probability": mom.mean, "prob_stderr": mom.stderr,
                   "ratio": mom.mean / scale, "ratio_stderr": mom.stderr / scale, "c_star": cs}
            if a == 0.5:
                row["exact_probability"] = bm_interval_survival(theta0, s_eps[k])
            table.append(row)
    return {"test": "one_point_green", "params": {"a": a, "ds": ds, "n_paths": n_paths, "seed": seed},
            "c_star": cs, "table": table}


def upsilon_infinity_mc(
    a: float, z: complex, eps: float, T: float, dt: float, n_paths: int, seed: int = 0,
    jobs: int | None = None,
) -> EnsembleStats:
    """Forward-flow estimate of ``P{Upsilon_T <= eps}`` (a lower bound for ``T = inf``)."""
    n = grid_steps(T, dt)
    res = forward_ensemble(a, z, n, dt, [n], n_paths, seed, eps, 0, jobs)
    hit = (res["stop0"] >= 0).astype(float)
    return EnsembleStats.from_samples(hit, math.nan, dt)


def theta_invariant_check(
    a: float, n_paths: int, T: float = 10.0, ds: float = 1e-3, seed: int = 0, theta0: float = math.pi / 2,
) -> dict:
    """KS distance of the weighted angle ``dTheta = 2a cot(Theta) ds + dW`` at time ``T`` to ``sin^{4a}``."""
    n = grid_steps(T, ds)
    th = np.full(n_paths, float(theta0))
    rngs = [path_rng(seed, i) for i in range(n_paths)]
    done, block = 0, 2048
    while done < n:
        nb = min(block, n - done)
        theta_advance(th, ds, np.stack([g.standard_normal(nb) for g in rngs]), 2 * a)
        done += nb
    grid = np.linspace(0.0, math.pi, 4001)
    dens = np.sin(grid) ** (4 * a)
    cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cdf /= cdf[-1]
    ks = stats.kstest(th, lambda x: np.interp(x, grid, cdf))
    return {"test": "theta_invariant", "a": a, "T": T, "ds": ds, "n_paths": n_paths,
            "ks_distance": float(ks.statistic), "ks_pvalue": float(ks.pvalue)}


def green_agreement(report: dict, band: float = 0.15, cstar_band: float | None = None) -> dict:
    """Check the ratios of a :func:`one_point_green_estimate` table per ``eps``.

    The ratios for different ``z`` agree when each lies within ``band`` of
    their mean.  With ``cstar_band`` the mean must also lie within that
    relative distance of ``c*``.
    """
    cs = report["c_star"]
    rows = []
    for eps in sorted({row["eps"] for row in report["table"]}):
        ratios = np.array([row["ratio"] for row in report["table"] if row["eps"] == eps])
        common = float(ratios.mean())
        spread = float(np.max(np.abs(ratios / common - 1.0)))
        ok = spread <= band
        if cstar_band is not None:
            ok = ok and abs(common / cs - 1.0) <= cstar_band
        rows.append({"eps": eps, "common": common, "max_rel_dev": spread,
                     "common_vs_c_star": common / cs, "passed": bool(ok)})
    return {"band": band, "cstar_band": cstar_band, "rows": rows, "passed": all(r["passed"] for r in rows)}
