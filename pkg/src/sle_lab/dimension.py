"""Fractal-dimension estimators for traces: box counting, p-variation and Holder fits."""

from __future__ import annotations

import math

import numpy as np

from .loewner import Trace
from .natural import densify
from .params import DomainError
from .stats import ScalingFit, ols_fit


def _points_of(obj) -> np.ndarray:
    if isinstance(obj, Trace):
        return obj.points
    return np.asarray(obj, dtype=complex).ravel()


def step_spacing(points) -> float:
    """Median distance between consecutive samples."""
    p = _points_of(points)
    if p.size < 2:
        return math.inf
    return float(np.median(np.abs(np.diff(p))))


def default_scales(points, n_scales: int = 8, lo: float = 1e-2, hi: float = 10**-0.5) -> np.ndarray:
    """Geometric scales between ``lo`` and ``hi`` times the diameter.

    The lower end is raised to the sample spacing when the points are too
    sparse; below it the polyline is straight and slopes drift to 1, above
    ``hi`` the boxes saturate.
    """
    p = _points_of(points)
    diam = max(np.ptp(p.real), np.ptp(p.imag))
    a = max(lo * diam, step_spacing(p))
    b = max(hi * diam, a * 10**1.5)
    return np.geomspace(a, b, n_scales)


def box_counts(points, scales, offsets: int = 4, seed: int = 0, polyline: bool = True) -> np.ndarray:
    """Occupied box counts at each scale, averaged over random grid offsets.

    With ``polyline`` the samples are joined by segments densified to a
    quarter of the scale, so boxes crossed between samples also count.
    """
    p = _points_of(points)
    rng = np.random.default_rng(seed)
    out = np.empty(len(scales))
    for i, eps in enumerate(scales):
        q = densify(p, eps / 4) if polyline else p
        tot = 0.0
        for shift in rng.random((offsets, 2)) * eps:
            ix = np.floor((q.real + shift[0]) / eps).astype(np.int64)
            iy = np.floor((q.imag + shift[1]) / eps).astype(np.int64)
            tot += np.unique(np.stack([ix, iy]), axis=1).shape[1]
        out[i] = tot / offsets
    return out


def box_count_dimension(
    trace, scales=None, t_range=None, offsets: int = 4, seed: int = 0, polyline: bool = True,
) -> ScalingFit:
    """Slope of ``log N(eps)`` against ``log(1/eps)``.

    For a :class:`Trace` the points are restricted to ``t_range``, by default
    ``[0.1 T, T]`` to stay away from the root on the real line.  Plain point
    arrays are used whole.  ``xs`` of the fit are ``log(1/eps)``.
    """
    if isinstance(trace, Trace):
        T = float(trace.times[-1])
        t1, t2 = (0.1 * T, T) if t_range is None else t_range
        pts = trace.window(t1, t2)
    else:
        pts = _points_of(trace)
    if pts.size < 2:
        raise DomainError("need at least two points")
    scales = default_scales(pts) if scales is None else np.sort(np.asarray(scales, dtype=float))
    if scales.size < 4:
        raise DomainError("need at least 4 scales")
    if math.log10(scales[-1] / scales[0]) < 1.5 - 1e-9:
        raise DomainError("scales must span at least 1.5 decades")
    if scales[0] < step_spacing(pts) * (1 - 1e-9):
        raise DomainError(
            f"smallest scale {scales[0]:.3g} is below the sample spacing {step_spacing(pts):.3g}; "
            "the trace is too coarse"
        )
    counts = box_counts(pts, scales, offsets, seed, polyline)
    fit = ols_fit(np.log(1.0 / scales), np.log(counts))
    return fit


def _dyadic_levels(n_steps: int) -> int:
    if n_steps < 2 or n_steps & (n_steps - 1):
        raise DomainError(f"trace needs 2^k steps, got {n_steps}")
    return n_steps.bit_length() - 1


def variation_sums(trace, p_grid, min_level: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """``log sum |gamma(t_j) - gamma(t_{j-1})|^p`` on dyadic partitions.

    Returns ``(levels, table)`` with ``table[i, j]`` for ``p_grid[i]`` and
    the partition into ``2^levels[j]`` pieces.
    """
    p = _points_of(trace)
    top = _dyadic_levels(p.size - 1)
    if top < min_level + 2:
        raise DomainError("trace too short for a dyadic variation fit")
    levels = np.arange(min_level, top + 1)
    table = np.empty((len(p_grid), levels.size))
    for j, lev in enumerate(levels):
        inc = np.abs(np.diff(p[:: 2 ** (top - lev)]))
        inc = inc[inc > 0]
        for i, pp in enumerate(p_grid):
            table[i, j] = np.log(np.sum(inc**pp))
    return levels, table


def variation_dimension(trace, p_grid=None, min_level: int = 4, fit_levels: int | None = None) -> dict:
    """The ``p`` where the p-variation sums switch from growing to shrinking.

    For each ``p`` the sums are fitted against ``log n`` over the finest
    ``fit_levels`` dyadic levels; the slope is decreasing in ``p`` and its
    zero crossing, found by linear interpolation, is the estimate.
    """
    p_grid = np.arange(1.0, 2.5001, 0.05) if p_grid is None else np.asarray(p_grid, dtype=float)
    levels, table = variation_sums(trace, p_grid, min_level)
    if fit_levels is not None:
        levels, table = levels[-fit_levels:], table[:, -fit_levels:]
    x = levels * math.log(2.0)
    slopes = np.array([ols_fit(x, row).slope for row in table])
    flat = np.nonzero(np.abs(slopes) < 1e-9)[0]
    cross = np.nonzero((slopes[:-1] > 0) & (slopes[1:] <= 0))[0]
    if flat.size:
        est = float(p_grid[flat[0]])
    elif cross.size == 0:
        est = math.nan
    else:
        i = int(cross[0])
        s0, s1 = slopes[i], slopes[i + 1]
        est = float(p_grid[i] + (p_grid[i + 1] - p_grid[i]) * s0 / (s0 - s1))
    return {"estimate": est, "p_grid": p_grid, "slopes": slopes, "levels": levels}


def holder_report(trace: Trace, t1: float | None = None, t2: float | None = None, min_gap: int = 1) -> ScalingFit:
    """Fit ``log max |gamma(s) - gamma(s + h)|`` against ``log h`` over dyadic gaps.

    The window defaults to ``[T/2, T]``; ``t1`` must be positive.  The slope
    is the fitted Holder exponent.
    """
    T = float(trace.times[-1])
    t1 = 0.5 * T if t1 is None else t1
    t2 = T if t2 is None else t2
    if not t1 > 0:
        raise DomainError("the window must start at a positive time")
    pts = trace.window(t1, t2)
    n = pts.size - 1
    gaps = min_gap * 2 ** np.arange(0, max(1, int(math.log2(max(n // (4 * min_gap), 1))) + 1))
    gaps = gaps[gaps <= n // 4] if n >= 8 else gaps[:1]
    if gaps.size < 2:
        raise DomainError("window too short for a Holder fit")
    sup = np.array([np.abs(pts[g:] - pts[:-g]).max() for g in gaps])
    return ols_fit(np.log(gaps * trace.dt), np.log(sup))


def _dim_chunk(indices, *, seed, a, n_points, T, method):
    from .driving import sample_brownian_driver
    from .loewner import trace

    out = np.empty(len(indices))
    for row, i in enumerate(indices):
        tr = trace(sample_brownian_driver(T, T / n_points, seed, a=a, index=i))
        if method == "box":
            out[row] = box_count_dimension(tr).slope
        elif method == "variation":
            out[row] = variation_dimension(tr)["estimate"]
        else:
            out[row] = holder_report(tr).slope
    return {"est": out}


METHODS = ("box", "variation", "holder")


def dimension_ensemble(
    kappa: float, n_paths: int = 20, n_points: int = 20000, seed: int = 0, T: float = 1.0,
    method: str = "box", tol: float = 0.15, jobs: int | None = None,
) -> dict:
    """Mean estimate over independent traces against ``1 + kappa/8``.

    ``variation`` needs ``n_points`` to be a power of two.  ``holder`` is
    report only.
    """
    from .ensemble import concat, map_chunks
    from .stats import RunningMoments

    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}")
    a = 2.0 / kappa
    res = map_chunks(_dim_chunk, n_paths, 1, jobs, seed=seed, a=a, n_points=n_points, T=T, method=method)
    est = concat(res, "est")
    mom = RunningMoments.of(est)
    target = 1.0 + kappa / 8.0
    out = {"test": "dimension", "method": method,
           "params": {"kappa": kappa, "n_paths": n_paths, "n_points": n_points, "seed": seed, "T": T},
           "estimates": est, "mean": mom.mean, "stderr": mom.stderr, "target": target, "tol": tol}
    if method != "holder":
        out["passed"] = bool(abs(mom.mean - target) <= tol)
    return out
