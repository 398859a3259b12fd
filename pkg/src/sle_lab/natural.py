"""Candidate natural-parametrization estimators, good events and Frostman energy.

Four candidates for the natural time of the trace are computed as
nondecreasing series ``tau_n(t)``:

* ``derivative_sum``: ``sum_{k <= tn} n^{-d/2} |f^_{k/n}'(i/sqrt n)|^d``,
  with ``f^_t(z) = f_t(z + U_t)``;
* ``d_variation``: ``sum |gamma(k/n) - gamma((k-1)/n)|^d``;
* ``minkowski``: ``eps^{d-2}`` times the area of the ``eps``-neighbourhood;
* ``conformal_minkowski``: the same with ``{Upsilon_t <= eps}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import reverse_batch, upsilon_nodes
from .driving import DrivingPath
from .loewner import (
    SWALLOW_EPS, ReverseFlowState, SlitChain, Trace, _resolve_a, _step_caps, build_chain, hull_points,
)
from .params import DomainError, dimension

CANDIDATES = ("minkowski", "conformal_minkowski", "d_variation", "derivative_sum")


@dataclass(frozen=True)
class ParamSeries:
    n: int
    times: np.ndarray
    taus: np.ndarray
    candidate: str

    def __post_init__(self):
        if self.candidate not in CANDIDATES:
            raise DomainError(f"unknown candidate {self.candidate!r}")

    def at(self, t: float) -> float:
        k = int(np.searchsorted(self.times, t + 1e-12, side="right")) - 1
        return float(self.taus[max(k, 0)])

    @property
    def is_monotone(self) -> bool:
        return bool(self.taus[0] == 0.0 and np.all(np.diff(self.taus) >= 0))

    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.taus])
        np.savetxt(path, data, delimiter=",", header="t,tau", comments="", fmt="%.17g")


def _steps_per_block(dt: float, n: int) -> int:
    m = round(1.0 / (n * dt))
    if m < 1 or abs(m * n * dt - 1.0) > 1e-9:
        raise DomainError(f"1/n = {1 / n!r} is not a multiple of the grid step {dt!r}")
    return int(m)


def hat_derivatives(chain: SlitChain, n: int, k_max: int | None = None) -> np.ndarray:
    """``|f^_{k/n}'(i/sqrt n)|`` for ``k = 1..k_max`` from the slit chain."""
    m = _steps_per_block(chain.dt, n)
    k_max = chain.n_steps // m if k_max is None else k_max
    if k_max * m > chain.n_steps:
        raise DomainError("driver does not reach the requested time")
    ks = m * np.arange(1, k_max + 1)
    base = np.array([chain.driver_at(int(k)) for k in ks])
    _, d = chain.inverse_at_times(ks, base + 1j / math.sqrt(n))
    return np.abs(d)


def tau_derivative_sum(driver: DrivingPath, n: int, a: float | None = None, t_max: float | None = None) -> ParamSeries:
    """Partial sums ``tau_n(k/n) = sum_{j <= k} n^{-d/2} |f^_{j/n}'(i/sqrt n)|^d``."""
    chain = build_chain(driver, a)
    d = dimension(chain.a)
    m = _steps_per_block(driver.dt, n)
    k_max = driver.n_steps // m if t_max is None else int(round(t_max * n))
    if k_max * m > driver.n_steps:
        raise DomainError("driver does not cover t_max")
    inc = n ** (-d / 2) * hat_derivatives(chain, n, k_max) ** d
    taus = np.concatenate([[0.0], np.cumsum(inc)])
    return ParamSeries(n, np.arange(k_max + 1) / n, taus, "derivative_sum")


def tau_d_variation(trace: Trace, n: int, d: float, t_max: float | None = None) -> ParamSeries:
    """Partial sums of ``|gamma(k/n) - gamma((k-1)/n)|^d``."""
    m = _steps_per_block(trace.dt, n)
    pts = trace.points[::m]
    if t_max is not None:
        pts = pts[: int(round(t_max * n)) + 1]
    inc = np.abs(np.diff(pts)) ** d
    taus = np.concatenate([[0.0], np.cumsum(inc)])
    return ParamSeries(n, np.arange(pts.size) / n, taus, "d_variation")


def densify(points, spacing: float) -> np.ndarray:
    """Insert points along each polyline segment so gaps are at most ``spacing``."""
    p = np.asarray(points, dtype=complex)
    if p.size < 2:
        return p
    seg = np.diff(p)
    k = np.maximum(1, np.ceil(np.abs(seg) / spacing).astype(np.int64))
    starts = np.repeat(p[:-1], k)
    frac = np.concatenate([np.arange(j) / j for j in k])
    return np.concatenate([starts + np.repeat(seg, k) * frac, p[-1:]])


def densify_pieces(pieces, spacing: float) -> np.ndarray:
    """Densify each row of ``pieces`` separately and concatenate."""
    pieces = np.atleast_2d(pieces)
    return np.concatenate([densify(row, spacing) for row in pieces])


def _pixel_grid(bbox, h: float):
    x0, x1, y0, y1 = bbox
    nx = int(math.ceil((x1 - x0) / h - 1e-9))
    ny = int(math.ceil((y1 - y0) / h - 1e-9))
    return nx, ny


def _pixels_near(dense: np.ndarray, bbox, h: float, radius: float) -> np.ndarray:
    """Flat indices of pixels whose centre may lie within ``radius`` of ``dense``."""
    x0, _, y0, _ = bbox
    nx, ny = _pixel_grid(bbox, h)
    ix = np.floor((dense.real - x0) / h).astype(np.int64)
    iy = np.floor((dense.imag - y0) / h).astype(np.int64)
    cell = np.unique(iy * (nx + 1) + ix)  # dense points are many per pixel
    ix, iy = cell % (nx + 1), cell // (nx + 1)
    w = int(math.ceil(radius / h)) + 1
    off = np.arange(-w, w + 1)
    out = []
    for dy in off:
        jy = iy + dy
        for dx in off:
            jx = ix + dx
            ok = (jx >= 0) & (jx < nx) & (jy >= 0) & (jy < ny)
            out.append(jy[ok] * nx + jx[ok])
    return np.unique(np.concatenate(out))


def _centres(flat: np.ndarray, bbox, h: float) -> np.ndarray:
    x0, _, y0, _ = bbox
    nx, _ = _pixel_grid(bbox, h)
    return (x0 + h * (flat % nx + 0.5)) + 1j * (y0 + h * (flat // nx + 0.5))


def _tree(points: np.ndarray) -> cKDTree:
    return cKDTree(np.column_stack([points.real, points.imag]))


def tau_minkowski(trace_or_points, eps: float, d: float, bbox=None, grid_h: float | None = None) -> float:
    """``eps^{d-2}`` times the area of ``{z : dist(z, trace) <= eps}`` by pixel counting.

    The polyline is densified to the pixel size and distances come from a
    k-d tree; only pixels near the trace are queried.  ``bbox = (x0, x1, y0,
    y1)`` must contain the neighbourhood.
    """
    pts = trace_or_points.points if isinstance(trace_or_points, Trace) else np.asarray(trace_or_points, dtype=complex)
    if pts.size == 0:
        return 0.0
    h = eps / 4 if grid_h is None else grid_h
    if h > eps / 4 * (1 + 1e-12):
        raise DomainError("grid_h must be at most eps/4")
    lo = (pts.real.min() - eps, pts.real.max() + eps, pts.imag.min() - eps, pts.imag.max() + eps)
    if bbox is None:
        bbox = (lo[0] - h, lo[1] + h, lo[2] - h, lo[3] + h)
    elif bbox[0] > lo[0] or bbox[1] < lo[1] or bbox[2] > lo[2] or bbox[3] < lo[3]:
        raise DomainError("bbox does not contain the eps-neighbourhood of the trace")
    dense = densify(pts, h / 2)
    cand = _centres(_pixels_near(dense, bbox, h, eps), bbox, h)
    dist, _ = _tree(dense).query(np.column_stack([cand.real, cand.imag]), distance_upper_bound=eps * (1 + 1e-12))
    return eps ** (d - 2) * int(np.count_nonzero(dist <= eps)) * h * h


def upsilon_at(chain: SlitChain, zs, k: int | None = None) -> np.ndarray:
    """``Upsilon_{t_k}(z) = Im g_t(z) / |g_t'(z)|`` with swallowed points frozen."""
    zs = np.asarray(zs, dtype=complex).ravel()
    if np.any(zs.imag <= 0):
        raise DomainError("points must lie in the upper half-plane")
    k = chain.n_steps if k is None else k
    lu = upsilon_nodes(
        np.ascontiguousarray(chain.du[:k]), np.ascontiguousarray(chain.c[:k]),
        zs.real.copy(), zs.imag.copy(), SWALLOW_EPS,
    )
    return np.exp(lu)


def tau_conformal_minkowski(
    driver: DrivingPath, eps: float, t: float, bbox, grid_h: float | None = None,
    d: float | None = None, a: float | None = None, reach: float = 5.0,
) -> float:
    """``eps^{d-2}`` times the area of ``{z in bbox : Upsilon_t(z) <= eps}``.

    ``bbox = (x0, x1, 0, y1)`` is sampled at cell centres of size ``grid_h``
    (default ``eps/4``).  Cells with ``Im z <= eps`` always count since
    ``Upsilon_t(z) <= Im z``.  Above that strip only cells within
    ``reach * eps`` of the trace are evaluated; ``Upsilon`` is comparable to
    the distance to the trace within a factor 4, so the rest cannot count.
    """
    chain = build_chain(driver, a)
    d = dimension(chain.a) if d is None else d
    h = eps / 4 if grid_h is None else grid_h
    if bbox[2] != 0:
        raise DomainError("bbox must start on the real line")
    nx, ny = _pixel_grid(bbox, h)
    strip = nx * int(np.count_nonzero(h * (np.arange(ny) + 0.5) <= eps))
    k = chain.index_of(t)
    if k == 0:
        return eps ** (d - 2) * strip * h * h
    dense = densify_pieces(hull_points(chain, 4, k), h / 2)
    cand = _centres(_pixels_near(dense, bbox, h, reach * eps), bbox, h)
    cand = cand[cand.imag > eps]
    ups = upsilon_at(chain, cand, k)
    return eps ** (d - 2) * (strip + int(np.count_nonzero(ups <= eps))) * h * h


def upsilon_comparability(driver: DrivingPath, zs, t: float, a: float | None = None, refine: int = 64) -> np.ndarray:
    """``Upsilon_t(z) / dist(z, gamma[0,t] u R)`` for each ``z``.

    Distances are to the refined hull boundary.  Points swallowed by a
    loop have no meaningful ratio and should be excluded by the caller.
    """
    chain = build_chain(driver, a)
    k = chain.index_of(t)
    zs = np.asarray(zs, dtype=complex).ravel()
    ups = upsilon_at(chain, zs, k)
    hull = hull_points(chain, refine, k)
    dense = densify_pieces(hull, 1e-3 * max(1.0, float(np.abs(hull).max())))
    dist, _ = _tree(dense).query(np.column_stack([zs.real, zs.imag]))
    return ups / np.minimum(dist, zs.imag)


def candidate_comparison(driver: DrivingPath, ns, t: float = 1.0, a: float | None = None, minkowski_max_n: int = 128) -> dict:
    """All four candidates at time ``t`` for each ``n``, with ``eps = 1/n``.

    The conformal variant drops the strip ``{Im z <= eps}``, whose area
    depends only on the box width.  Ratios are to ``derivative_sum``.
    """
    from .loewner import trace as make_trace

    a = _resolve_a(driver, a)
    d = dimension(a)
    k = int(round(t / driver.dt))
    tr = make_trace(DrivingPath(driver.dt, driver.values[: k + 1], a=a))
    pts = tr.points
    pad = 0.1
    bbox = (pts.real.min() - pad, pts.real.max() + pad, 0.0, pts.imag.max() + pad)
    out = {c: {} for c in CANDIDATES}
    for n in ns:
        n = int(n)
        ds = tau_derivative_sum(driver, n, a, t_max=t).at(t)
        out["derivative_sum"][n] = ds
        out["d_variation"][n] = tau_d_variation(tr, n, d, t_max=t).at(t)
        if n <= minkowski_max_n:
            eps = 1.0 / n
            out["minkowski"][n] = tau_minkowski(tr, eps, d)
            strip = tau_conformal_minkowski(driver, eps, 0.0, bbox, d=d, a=a)
            out["conformal_minkowski"][n] = tau_conformal_minkowski(driver, eps, t, bbox, d=d, a=a) - strip
    ratios = {
        c: {n: v / out["derivative_sum"][n] for n, v in vals.items()}
        for c, vals in out.items() if c != "derivative_sum"
    }
    return {"values": out, "ratios": ratios, "t": t, "d": d}



# ---------------------------------------------------------------------------
# good events and Frostman weights
# ---------------------------------------------------------------------------

def phi0(x, C: float = 10.0, u: float = 1.0):
    """``C exp{[log(x+1)]^{1/2} [log log(x+2)]^u}``.

    ``log log(x+2)`` is negative for ``x < e - 2``; the power is then taken
    sign-preservingly, ``sign(v)|v|^u``, which agrees with ``v^u`` for
    integer ``u`` and keeps the function defined for every ``u``.
    """
    x = np.asarray(x, dtype=float)
    ll = np.log(np.log(x + 2.0))
    return C * np.exp(np.sqrt(np.log1p(x)) * np.sign(ll) * np.abs(ll) ** u)


EVENT_NAMES = ("Y_vs_1/t", "Y_vs_nt", "X_vs_1/t", "X_vs_nt", "deriv_vs_nt", "deriv_ratio")


@dataclass(frozen=True)
class GoodEventReport:
    events: tuple
    C: float
    u: float
    n: int
    S: float

    @property
    def overall(self) -> bool:
        return all(self.events)

    def to_dict(self) -> dict:
        out = {name: bool(e) for name, e in zip(EVENT_NAMES, self.events)}
        out.update({"overall": self.overall, "C": self.C, "u": self.u, "n": self.n, "S": self.S})
        return out


def good_event_indicator(
    state: ReverseFlowState, n: int, C: float = 10.0, u: float = 1.0, a: float | None = None,
    S: float | None = None,
) -> GoodEventReport:
    """The six regularity events on the grid times in ``[1/n, S]``."""
    if abs(state.z0 - 1j / math.sqrt(n)) > 1e-12:
        raise DomainError(f"state must start at i/sqrt(n) = {1j / math.sqrt(n)!r}, got {state.z0!r}")
    a = state.a if a is None else a
    beta = dimension(a) - 1.5
    S = float(state.times[-1]) if S is None else S
    k_end = state.at(S)
    t = state.times[: k_end + 1]
    sel = t >= 1.0 / n - 1e-12
    t = t[sel]
    X, Y = state.X[: k_end + 1][sel], state.Y[: k_end + 1][sel]
    logd = state.log_abs_deriv[: k_end + 1][sel]
    p_inv, p_n = phi0(1.0 / t, C, u), phi0(n * t, C, u)
    rt = np.sqrt(t)
    lphi_inv, lphi_n = np.log(p_inv), np.log(p_n)
    e5 = np.abs(logd - beta * np.log(n * t)) <= lphi_n
    ratio = state.log_abs_deriv[k_end] - logd
    e6 = np.abs(ratio + beta * np.log(t)) <= lphi_inv
    events = (
        bool(np.all(Y >= rt / p_inv)),
        bool(np.all(Y >= rt / p_n)),
        bool(np.all(np.abs(X) <= rt * p_inv)),
        bool(np.all(np.abs(X) <= rt * p_n)),
        bool(np.all(e5)),
        bool(np.all(e6)),
    )
    return GoodEventReport(events, C, u, n, S)


def frostman_weight(state: ReverseFlowState, n: int, a: float | None, event: GoodEventReport) -> float:
    """``n^{1-d/2} |h_S'(i/sqrt n)|^d`` on the good event, else 0."""
    if event.n != n:
        raise DomainError("event and weight use different n")
    if not event.overall:
        return 0.0
    a = state.a if a is None else a
    d = dimension(a)
    k = state.at(event.S)
    return float(n ** (1 - d / 2) * math.exp(d * state.log_abs_deriv[k]))


def trace_weights(driver: DrivingPath, n: int, C: float = 10.0, u: float = 1.0, a: float | None = None):
    """Weights ``F(k, n)`` for the trace points ``gamma(k/n)``, ``k = 1..n T``.

    For each ``k`` the reverse flow driven by the time reversal of the driver
    on ``[0, k/n]`` reproduces ``f^_{k/n}`` exactly, so the events and the
    derivative are read off the same flow.
    """
    a = _resolve_a(driver, a)
    d = dimension(a)
    m = _steps_per_block(driver.dt, n)
    K = driver.n_steps // m
    z = 1j / math.sqrt(n)
    weights = np.zeros(K)
    passed = np.zeros(K, dtype=bool)
    for k in range(1, K + 1):
        v = driver.values[: k * m + 1]
        U = (v[::-1] - v[-1])[None, :]
        Z, L, _ = reverse_batch(np.ascontiguousarray(U), _step_caps(k * m, driver.dt, a), z, np.arange(k * m + 1))
        st = ReverseFlowState(driver.dt * np.arange(k * m + 1), Z[0], L[0], "reverse", a, z)
        ev = good_event_indicator(st, n, C, u, a)
        passed[k - 1] = ev.overall
        weights[k - 1] = frostman_weight(st, n, a, ev)
    return weights, passed


@dataclass(frozen=True)
class EmpiricalMeasure:
    centers: np.ndarray
    masses: np.ndarray
    smear_radius: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=complex).ravel()
        m = np.asarray(self.masses, dtype=float).ravel()
        if c.shape != m.shape:
            raise DomainError("centers and masses must have equal length")
        if np.any(m < 0):
            raise DomainError("masses must be nonnegative")
        if not self.smear_radius > 0:
            raise DomainError("smear_radius must be positive (point masses have infinite energy)")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "masses", m)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def dilate(self, s: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.centers * s, self.masses, self.smear_radius * s)


def frostman_measure(
    driver: DrivingPath, trace: Trace, n: int, alpha: float, C: float = 10.0, u: float = 1.0,
    a: float | None = None,
) -> EmpiricalMeasure:
    """Atoms at ``gamma(k/n)`` with mass ``F(k,n)/n`` and radius ``n^{-(1-xi)/alpha}``."""
    a = _resolve_a(driver, a)
    d = dimension(a)
    xi = d * (d - 2) + 1
    w, passed = trace_weights(driver, n, C, u, a)
    m = _steps_per_block(trace.dt, n)
    centers = trace.points[m::m][: w.size]
    return EmpiricalMeasure(centers, w / n, n ** (-(1 - xi) / alpha), {"n": n, "pass_rate": float(passed.mean())})


# ---------------------------------------------------------------------------
# Frostman energy
# ---------------------------------------------------------------------------

def _lens_area(s, rho: float):
    """Overlap area of two disks of radius ``rho`` with centres ``s`` apart."""
    s = np.minimum(np.asarray(s, dtype=float), 2 * rho)
    return 2 * rho * rho * np.arccos(s / (2 * rho)) - 0.5 * s * np.sqrt(np.maximum(4 * rho * rho - s * s, 0.0))


def disk_pair_kernel(D, rho: float, alpha: float, nodes: int = 32):
    """Mean of ``|x - y|^{-alpha}`` for ``x, y`` uniform on disks of radius ``rho``.

    ``D`` is the distance between the centres.  Pairs farther apart than
    ``4 rho`` use ``D^{-alpha}``.  Otherwise ``x - y`` has density
    ``A(|w - D|) / (pi rho^2)^2`` with ``A`` the lens area, and the integral
    is done in polar coordinates around ``w = 0`` with ``u = r^{2-alpha}``,
    which removes the singularity, by a ``nodes x nodes`` Gauss-Legendre
    product rule.
    """
    if not 0 < alpha < 2:
        raise DomainError("alpha must lie in (0, 2)")
    D = np.atleast_1d(np.asarray(D, dtype=float))
    out = np.empty_like(D)
    far = D > 4 * rho
    out[far] = D[far] ** (-alpha)
    near = ~far
    if near.any():
        g, gw = np.polynomial.legendre.leggauss(nodes)
        Dn = D[near][:, None, None]
        p = 2 - alpha
        r0 = np.maximum(Dn - 2 * rho, 0.0) ** p
        r1 = (Dn + 2 * rho) ** p
        uu = 0.5 * (r1 + r0) + 0.5 * (r1 - r0) * g[None, :, None]
        r = uu ** (1 / p)
        phi = 0.5 * math.pi * (g + 1)[None, None, :]
        s = np.sqrt(np.maximum(r * r + Dn * Dn - 2 * r * Dn * np.cos(phi), 0.0))
        vals = _lens_area(s, rho)
        w = (0.5 * (r1 - r0) * gw[None, :, None]) * (0.5 * math.pi * gw[None, None, :])
        integral = 2 * np.sum(vals * w, axis=(1, 2)) / p
        out[near] = integral / (math.pi * rho * rho) ** 2
    return out


@dataclass(frozen=True)
class EnergyResult:
    total: float
    diagonal: float
    off_diagonal: float
    flagged: bool = False


def frostman_energy(mu: EmpiricalMeasure, alpha: float, nodes: int = 32) -> EnergyResult:
    """``E_alpha(mu) = sum_{j,k} m_j m_k I(|c_j - c_k|)`` with the disk-pair kernel.

    ``alpha >= 2`` makes the self-energy of a uniform disk diverge; the
    result is then ``inf`` and flagged.
    """
    if alpha >= 2:
        return EnergyResult(math.inf, math.inf, math.nan, True)
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    m, c, rho = mu.masses, mu.centers, mu.smear_radius
    keep = m > 0
    m, c = m[keep], c[keep]
    if m.size == 0:
        return EnergyResult(0.0, 0.0, 0.0)
    self_k = float(disk_pair_kernel(0.0, rho, alpha, nodes)[0])
    diag = float(np.sum(m * m)) * self_k
    off = 0.0
    tree = cKDTree(np.column_stack([c.real, c.imag]))
    near_pairs = tree.query_pairs(4 * rho, output_type="ndarray")
    # far field in blocks of rows
    for i0 in range(0, m.size, 1024):
        blk = slice(i0, min(i0 + 1024, m.size))
        Dm = np.abs(c[blk, None] - c[None, :])
        with np.errstate(divide="ignore"):
            K = np.where(Dm > 4 * rho, Dm, np.inf) ** (-alpha)
        off += float(np.sum(m[blk, None] * m[None, :] * K))
    if near_pairs.size:
        i, j = near_pairs[:, 0], near_pairs[:, 1]
        Dn = np.abs(c[i] - c[j])
        off += 2.0 * float(np.sum(m[i] * m[j] * disk_pair_kernel(Dn, rho, alpha, nodes)))
    return EnergyResult(diag + off, diag, off)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def _tau_chunk(indices, *, seed, a, ns, t, dt):
    from .driving import sample_brownian_driver

    out = np.empty((len(indices), len(ns)))
    for row, i in enumerate(indices):
        drv = sample_brownian_driver(t, dt, seed, a=a, index=i)
        for col, n in enumerate(ns):
            out[row, col] = tau_derivative_sum(drv, n, a, t_max=t).at(t)
    return {"tau": out}


def derivative_sum_ensemble(
    a: float, ns, n_paths: int, seed: int = 0, t: float = 1.0, dt: float | None = None,
    band: float = 1.5, jobs: int | None = None,
) -> dict:
    """Ensemble means of ``tau_n(t)`` for each ``n`` on shared drivers.

    The default grid is four steps per ``1/max(n)``.  The means are stable
    when ``max/min <= band``.
    """
    from .ensemble import concat, map_chunks
    from .stats import RunningMoments

    ns = [int(n) for n in ns]
    dt = 1.0 / (4 * max(ns)) if dt is None else dt
    res = map_chunks(_tau_chunk, n_paths, 8, jobs, seed=seed, a=a, ns=ns, t=t, dt=dt)
    tau = concat(res, "tau")
    rows = []
    for col, n in enumerate(ns):
        mom = RunningMoments.of(tau[:, col])
        rows.append({"n": n, "mean": mom.mean, "stderr": mom.stderr})
    means = np.array([r["mean"] for r in rows])
    ratio = float(means.max() / means.min())
    return {"test": "derivative_sum_stability", "params": {"a": a, "t": t, "dt": dt, "n_paths": n_paths,
            "seed": seed}, "rows": rows, "max_over_min": ratio, "band": band, "passed": bool(ratio <= band)}
