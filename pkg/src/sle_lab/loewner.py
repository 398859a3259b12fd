"""Discrete Loewner chains built from exact vertical-slit maps.

On each capacity step of length ``dt`` the driver is frozen and the Loewner
flow is solved exactly: the forward step is

    z -> u + sqrt((z - u)^2 + c),    c = 2 a dt,

which adds half-plane capacity ``c/2 = a dt``.  The forward chain freezes
step ``j`` at the right endpoint ``U_{t_j}``.  Reverse flows freeze each
step at its left endpoint; with that pairing the reverse flow driven by the
time-reversed path reproduces the inverse chain ``f_T`` exactly.
"""

from __future__ import annotations

import cmath
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._kernels import forward_batch, inverse_suffix, reverse_batch
from .driving import DrivingPath
from .params import DomainError

SWALLOW_EPS = 1e-12
CHAIN_MAGIC = b"SLECHN1"


# ---------------------------------------------------------------------------
# elementary maps
# ---------------------------------------------------------------------------

def _upper_sqrt(x, ref):
    """Square root of ``x`` on the branch with nonnegative imaginary part.

    Where the root is real the sign of ``ref.real`` decides.
    """
    s = np.sqrt(np.asarray(x, dtype=complex))
    flip = (s.imag < 0) | ((s.imag == 0) & (np.real(ref) < 0))
    return np.where(flip, -s, s)


def _slit_sqrt(zeta, c):
    """``sqrt(zeta^2 - c)`` on the closed upper half-plane branch.

    The product form keeps boundary points on the correct side of the slit.
    """
    zeta = np.asarray(zeta, dtype=complex)
    zeta = zeta.real + 1j * (zeta.imag + 0.0)  # turn -0.0 into +0.0
    rc = np.sqrt(c)
    return np.sqrt(zeta - rc) * np.sqrt(zeta + rc)


def slit_forward(z, du, c):
    """Forward elementary map and its derivative."""
    zeta = np.asarray(z, dtype=complex) - du
    w = _upper_sqrt(zeta * zeta + c, zeta)
    return w + du, zeta / w


def slit_inverse(w, du, c):
    """Inverse elementary map ``w -> du + sqrt((w - du)^2 - c)`` and its derivative."""
    zeta = np.asarray(w, dtype=complex) - du
    s = _slit_sqrt(zeta, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        deriv = zeta / s
    return s + du, deriv


@dataclass(frozen=True)
class SlitMap:
    du: float
    c: float

    @property
    def hcap(self) -> float:
        return self.c / 2

    def __call__(self, z):
        return slit_forward(z, self.du, self.c)[0]

    def inverse(self, w):
        return slit_inverse(w, self.du, self.c)[0]


class InverseValue(NamedTuple):
    value: complex
    deriv: complex
    flagged: bool


@dataclass(frozen=True)
class SlitChain:
    """Ordered slit maps; composing them in order gives the discrete ``g_t``."""

    du: np.ndarray
    c: np.ndarray
    dt: float
    a: float

    def __post_init__(self):
        for name in ("du", "c"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_steps(self) -> int:
        return self.du.size

    @property
    def T(self) -> float:
        return self.dt * self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def maps(self) -> list[SlitMap]:
        return [SlitMap(float(u), float(c)) for u, c in zip(self.du, self.c)]

    def hcap(self, k: int | None = None) -> float:
        k = self.n_steps if k is None else k
        return math.fsum(self.c[:k]) / 2

    def driver_at(self, k: int) -> float:
        """``U_{t_k}``; step ``k`` is frozen at its right endpoint."""
        return 0.0 if k == 0 else float(self.du[k - 1])

    def index_of(self, t: float) -> int:
        k = round(t / self.dt)
        if abs(k * self.dt - t) > 1e-9 * max(self.dt, abs(t)) or not 0 <= k <= self.n_steps:
            raise DomainError(f"time {t!r} is not on the chain grid")
        return int(k)

    # -- evaluation ------------------------------------------------------
    def forward(self, z, k: int | None = None):
        """``g_{t_k}(z)`` and ``g'_{t_k}(z)``."""
        k = self.n_steps if k is None else k
        w = np.array(z, dtype=complex)
        dw = np.ones_like(w)
        for j in range(k):
            w, f = slit_forward(w, self.du[j], self.c[j])
            dw = dw * f
        return w, dw

    def inverse(self, w, k: int | None = None):
        """``f_{t_k}(w)`` and ``f'_{t_k}(w)`` by composing inverses in reverse order."""
        k = self.n_steps if k is None else k
        z = np.array(w, dtype=complex)
        dz = np.ones_like(z)
        for j in range(k - 1, -1, -1):
            z, f = slit_inverse(z, self.du[j], self.c[j])
            dz = dz * f
        return z, dz

    def inverse_at_times(self, ks, ws, deriv: bool = True):
        """Evaluate ``f_{t_{k_i}}(w_i)`` for per-point times ``k_i``.

        Cost is ``sum_i k_i`` elementary evaluations, so a full trace is
        O(N^2); the loop runs in a compiled kernel.
        """
        ks = np.asarray(ks, dtype=np.int64)
        ws = np.asarray(ws, dtype=complex)
        if ks.shape != ws.shape or ks.ndim != 1:
            raise ValueError("ks and ws must be 1-d arrays of equal length")
        if ks.size and (ks.min() < 0 or ks.max() > self.n_steps):
            raise DomainError("time index outside the chain")
        order = np.argsort(ks, kind="stable")
        kk = ks[order]
        kmax = int(kk.max()) if kk.size else 0
        # map j (0-based) acts on points with k > j
        starts = np.searchsorted(kk, np.arange(kmax) + 1, side="left").astype(np.int64)
        w = ws[order]
        x, y, dx, dy = inverse_suffix(
            self.du[:kmax], np.sqrt(self.c[:kmax]), starts, w.real.copy(), w.imag + 0.0, deriv
        )
        out = np.empty(ks.size, dtype=complex)
        out[order] = x + 1j * y
        if not deriv:
            return out
        with np.errstate(invalid="ignore"):
            d = dx + 1j * dy
        dout = np.empty_like(out)
        dout[order] = d
        return out, dout

    # -- persistence -----------------------------------------------------
    def to_bytes(self) -> bytes:
        head = struct.pack("<ddQ", self.dt, self.a, self.n_steps)
        body = np.column_stack([self.du, self.c]).astype("<f8").tobytes()
        return CHAIN_MAGIC + head + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SlitChain":
        if not blob.startswith(CHAIN_MAGIC):
            raise DomainError("not a SLECHN1 container")
        off = len(CHAIN_MAGIC)
        dt, a, n = struct.unpack_from("<ddQ", blob, off)
        off += struct.calcsize("<ddQ")
        arr = np.frombuffer(blob, dtype="<f8", count=2 * n, offset=off).reshape(n, 2)
        return cls(arr[:, 0].copy(), arr[:, 1].copy(), dt, a)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SlitChain":
        return cls.from_bytes(Path(path).read_bytes())


def _resolve_a(driver: DrivingPath, a: float | None) -> float:
    a = driver.a if a is None else a
    if a is None or not a > 0:
        raise DomainError("the parametrization constant a must be given (on the driver or as an argument)")
    return float(a)


def build_chain(driver: DrivingPath, a: float | None = None) -> SlitChain:
    a = _resolve_a(driver, a)
    n = driver.n_steps
    return SlitChain(driver.values[1:].copy(), np.full(n, 2.0 * a * driver.dt), driver.dt, a)


# ---------------------------------------------------------------------------
# marked-point flows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReverseFlowState:
    """Time series for one marked point.

    ``Z`` is ``h_t(z) - U_t`` for reverse runs and ``g_t(z) - U_t`` for
    forward runs; ``log_abs_deriv`` is the log-modulus of the matching map
    derivative.
    """

    times: np.ndarray
    Z: np.ndarray
    log_abs_deriv: np.ndarray
    direction: str
    a: float
    z0: complex
    swallow_time: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def X(self) -> np.ndarray:
        return self.Z.real

    @property
    def Y(self) -> np.ndarray:
        return self.Z.imag

    @property
    def abs_deriv(self) -> np.ndarray:
        return np.exp(self.log_abs_deriv)

    @property
    def psi(self) -> np.ndarray:
        return self.abs_deriv / self.Y

    @property
    def upsilon(self) -> np.ndarray:
        return self.Y / self.abs_deriv

    def at(self, t: float) -> int:
        k = int(np.searchsorted(self.times, t - 1e-12))
        if k >= self.times.size or abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"time {t!r} not in the recorded series")
        return k


def _check_upper(z: complex) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise DomainError(f"marked point must lie in the upper half-plane, got {z!r}")
    return z


def forward_point(chain: SlitChain, z: complex) -> ReverseFlowState:
    """Follow ``g_t(z) - U_t`` and ``log|g_t'(z)|`` along the chain.

    When ``Im`` drops below the swallowing threshold the series is truncated;
    :attr:`ReverseFlowState.upsilon` then keeps its last value.
    """
    z = _check_upper(z)
    n = chain.n_steps
    Z = np.empty(n + 1, dtype=complex)
    logd = np.empty(n + 1)
    Z[0], logd[0] = z, 0.0
    g, ld = z, 0.0
    swallow = None
    last = n
    for j in range(n):
        zeta = g - chain.du[j]
        w = cmath.sqrt(zeta * zeta + chain.c[j])
        if w.imag < 0 or (w.imag == 0 and zeta.real < 0):
            w = -w
        ld += math.log(abs(zeta / w)) if zeta != 0 else -math.inf
        g = w + chain.du[j]
        if not w.imag >= SWALLOW_EPS:
            swallow = chain.dt * (j + 1)
            last = j
            break
        Z[j + 1], logd[j + 1] = w, ld
    return ReverseFlowState(
        times=chain.times[: last + 1],
        Z=Z[: last + 1],
        log_abs_deriv=logd[: last + 1],
        direction="forward",
        a=chain.a,
        z0=z,
        swallow_time=swallow,
    )


def _midpoint_rhs(h, u, a):
    zeta = h - u
    return -a / zeta, a / (zeta * zeta)


def _integrate_step(h, lh, u, a, span, tol, h0):
    """Integrate the reverse Loewner ODE with frozen driver ``u`` over ``span``.

    Explicit midpoint rule; each trial step is compared with two half steps
    and halved until the difference is below ``tol``.
    """
    s = 0.0
    H = min(h0, span)
    n_sub = 0
    while s < span * (1 - 1e-14):
        H = min(H, span - s)
        while True:
            # one full step
            f1, g1 = _midpoint_rhs(h, u, a)
            fm, gm = _midpoint_rhs(h + 0.5 * H * f1, u, a)
            h_full, l_full = h + H * fm, lh + H * gm
            # two half steps
            q = 0.5 * H
            fa, ga = _midpoint_rhs(h + 0.5 * q * f1, u, a)
            h_half, l_half = h + q * fa, lh + q * ga
            fb, gb = _midpoint_rhs(h_half, u, a)
            fc, gc = _midpoint_rhs(h_half + 0.5 * q * fb, u, a)
            h_two, l_two = h_half + q * fc, l_half + q * gc
            err = max(abs(h_two - h_full), abs(l_two - l_full))
            if err <= tol or H < 1e-14 * max(span, 1.0):
                break
            H *= 0.5
        h, lh = h_two, l_two
        s += H
        n_sub += 1
        if err < tol / 16:
            H *= 2.0
    return h, lh, H, n_sub


def reverse_point(driver: DrivingPath, z: complex, a: float | None = None, tol: float = 1e-8) -> ReverseFlowState:
    """Integrate ``dh/dt = a / (U_t - h)`` for one point by adaptive midpoint steps.

    The driver is held at ``U_{t_{k-1}}`` on step ``k``.  Records
    ``Z_t = h_t(z) - U_t`` and ``log|h_t'(z)|`` on the driver grid.
    """
    z = _check_upper(z)
    a = _resolve_a(driver, a)
    U = driver.values
    n = driver.n_steps
    Z = np.empty(n + 1, dtype=complex)
    logd = np.empty(n + 1)
    h, lh = z, 0j
    Z[0], logd[0] = z - U[0], 0.0
    H = driver.dt
    total_sub = 0
    for k in range(1, n + 1):
        h, lh, H, n_sub = _integrate_step(h, lh, U[k - 1], a, driver.dt, tol, H)
        total_sub += n_sub
        Z[k] = h - U[k]
        logd[k] = lh.real
    return ReverseFlowState(
        times=driver.times,
        Z=Z,
        log_abs_deriv=logd,
        direction="reverse",
        a=a,
        z0=z,
        meta={"substeps": total_sub, "tol": tol},
    )


def reverse_point_exact(driver: DrivingPath, z: complex, a: float | None = None) -> ReverseFlowState:
    """Reverse flow with each frozen-driver step solved in closed form."""
    z = _check_upper(z)
    a = _resolve_a(driver, a)
    Zs, logd, _ = reverse_flow_paths(driver.values[None, :], driver.dt, a, z)
    return ReverseFlowState(
        times=driver.times, Z=Zs[0], log_abs_deriv=logd[0], direction="reverse", a=a, z0=z
    )


def _step_caps(n_steps: int, dt, a: float) -> np.ndarray:
    """Per-step ``c = 2 a dt`` for a uniform step or an array of steps."""
    dts = np.broadcast_to(np.asarray(dt, dtype=float), (n_steps,))
    return np.ascontiguousarray(2.0 * a * dts)


def reverse_flow_paths(U: np.ndarray, dt, a: float, z: complex, record=None):
    """Exact frozen-step reverse flow for a batch of drivers (rows of ``U``).

    ``dt`` is a scalar or an array of per-step sizes.  Returns ``Z`` and
    ``log|h'|`` at the grid indices in ``record`` (all by default), each of
    shape ``(n_paths, len(record))``, and per-path counts of violations of
    the monotonicity of ``Y`` and ``Psi`` and of ``Y^2 <= y^2 + 2at``.
    """
    z = _check_upper(z)
    U = np.ascontiguousarray(np.atleast_2d(U), dtype=float)
    n1 = U.shape[1]
    record = np.arange(n1) if record is None else np.asarray(record, dtype=np.int64)
    if record.size and (np.any(np.diff(record) < 0) or record[0] < 0 or record[-1] >= n1):
        raise DomainError("record indices must be sorted grid indices")
    return reverse_batch(U, _step_caps(n1 - 1, dt, a), complex(z), record)


def forward_flow_paths(U: np.ndarray, dt, a: float, z: complex, record=None, floor: float = 0.0):
    """Forward chain flow of ``z`` for a batch of drivers (rows of ``U``).

    Paths stop (values frozen) when ``Upsilon <= floor`` or the point is
    swallowed.  Returns ``Z``, ``log|g'|`` at ``record``, the stop index per
    path (-1 if never stopped) and per-path counts of ``Upsilon`` increases.
    """
    z = _check_upper(z)
    U = np.ascontiguousarray(np.atleast_2d(U), dtype=float)
    n1 = U.shape[1]
    record = np.arange(n1) if record is None else np.asarray(record, dtype=np.int64)
    return forward_batch(U, _step_caps(n1 - 1, dt, a), complex(z), float(floor), record)


def inverse_at(chain: SlitChain, t: float, w: complex, loss_tol: float = 1e-6) -> InverseValue:
    """``f_t(w)`` and ``f_t'(w)`` for a single point with ``Im w > 0``.

    The result is flagged when the round trip ``g_t(f_t(w))`` misses ``w``
    by more than ``loss_tol`` relative to ``|w|``, which happens only when
    ``w`` sits so close to the slit that precision is gone.
    """
    w = complex(w)
    if not w.imag > 0:
        raise DomainError("inverse_at needs Im w > 0; use trace() for boundary values")
    k = chain.index_of(t)
    z, dz = chain.inverse_at_times(np.array([k]), np.array([w]))
    z, dz = complex(z[0]), complex(dz[0])
    back, _ = chain.forward(z, k)
    err = abs(complex(back) - w)
    flagged = not (np.isfinite(z) and np.isfinite(dz)) or err > loss_tol * max(1.0, abs(w))
    return InverseValue(z, dz, bool(flagged))


# ---------------------------------------------------------------------------
# traces and certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trace:
    times: np.ndarray
    points: np.ndarray
    y0: float
    error_bound: np.ndarray | None = None
    a: float | None = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    def window(self, t1: float, t2: float | None = None) -> np.ndarray:
        t2 = self.times[-1] if t2 is None else t2
        mask = (self.times >= t1 - 1e-12) & (self.times <= t2 + 1e-12)
        return self.points[mask]

    def to_csv(self, path) -> None:
        vb = self.error_bound if self.error_bound is not None else np.full(self.points.size, np.nan)
        data = np.column_stack([self.times, self.points.real, self.points.imag, vb])
        np.savetxt(path, data, delimiter=",", header="t,re,im,vbound", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "Trace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        vb = data[:, 3]
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], y0=0.0, error_bound=None if np.all(np.isnan(vb)) else vb)


def _geometric_nodes(y: float, panels: int = 48, order: int = 8):
    """Gauss-Legendre nodes on geometrically graded panels of ``(0, y]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = y * 2.0 ** -np.arange(panels + 1, dtype=float)
    edges = np.append(edges, 0.0)[::-1]
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)[:, None]
    nodes = (0.5 * (hi + lo))[:, None] + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def tip_error_bound(chain: SlitChain, t: float, y: float, cap: float = 1e12) -> float:
    """``v(t, y) = int_0^y |f_t'(U_t + i r)| dr`` by graded Gauss-Legendre quadrature.

    Returns ``inf`` if the integrand is non-finite or exceeds ``cap``.
    """
    return float(tip_error_bounds(chain, [chain.index_of(t)], y, cap)[0])


def tip_error_bounds(chain: SlitChain, ks, y: float, cap: float = 1e12) -> np.ndarray:
    ks = np.asarray(ks, dtype=np.int64)
    if not y > 0:
        raise DomainError("y must be positive")
    r, w = _geometric_nodes(y)
    base = np.array([chain.driver_at(int(k)) for k in ks])
    pts = (base[:, None] + 1j * r[None, :]).ravel()
    kk = np.repeat(ks, r.size)
    _, d = chain.inverse_at_times(kk, pts)
    integrand = np.abs(d).reshape(ks.size, r.size)
    v = integrand @ w
    bad = ~np.isfinite(integrand).all(axis=1) | (integrand.max(axis=1) > cap)
    v[bad] = np.inf
    return v


def trace(driver: DrivingPath, y0: float = 0.0, a: float | None = None, bound_stride: int = 1) -> Trace:
    """Trace points ``gamma(t_k)`` on the driver grid.

    ``y0 = 0`` composes the exact slit tips.  For ``y0 > 0`` the points are
    ``f_{t_k}(U_{t_k} + i y0)`` and ``error_bound[k] = v(t_k, y0)`` is filled
    every ``bound_stride`` points (NaN elsewhere).
    """
    if y0 < 0:
        raise DomainError("y0 must be nonnegative")
    chain = build_chain(driver, a)
    ks = np.arange(driver.n_steps + 1)
    ws = driver.values.astype(complex) + 1j * y0
    pts = chain.inverse_at_times(ks, ws, deriv=False)
    bound = None
    if y0 > 0:
        bound = np.full(ks.size, np.nan)
        sel = ks[::bound_stride]
        bound[sel] = tip_error_bounds(chain, sel, y0)
    return Trace(driver.times, pts, y0, bound, chain.a)


def hull_points(chain: SlitChain, refine: int = 8, k: int | None = None) -> np.ndarray:
    """Hull boundary pieces, shape ``(k, refine + 1)``.

    Row ``j`` is the image under ``f_{t_j}`` of the vertical slit
    ``[U, U + i sqrt(c)]`` added by step ``j + 1``, sampled from its base on
    the earlier hull (or the real line) to ``gamma(t_{j+1})``.  Consecutive
    rows need not join: the base of a new piece can sit anywhere on the
    earlier hull.
    """
    k = chain.n_steps if k is None else k
    if refine < 1:
        raise DomainError("refine must be at least 1")
    steps = np.repeat(np.arange(k), refine + 1)
    frac = np.tile(np.arange(refine + 1) / refine, k)
    ws = chain.du[steps] + 1j * np.sqrt(chain.c[steps]) * frac
    pts = chain.inverse_at_times(steps, ws, deriv=False)
    return pts.reshape(k, refine + 1)


def rect_distortion_check(
    chain: SlitChain, r: float, pairs=None, n_pairs: int = 100, alpha: float = 1.0, seed: int = 0
) -> dict:
    """Largest ``log|f'(w)| - log|f'(z)|`` over pairs in ``[-r, r] x [1/r, r]``.

    Diagnostic only: the reference ``alpha log(2r)`` uses the supplied ``alpha``.
    """
    if r < 1:
        raise DomainError("r must be at least 1")
    if pairs is None:
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-r, r, (n_pairs, 2)) + 1j * rng.uniform(1 / r, r, (n_pairs, 2))
    else:
        pts = np.asarray(pairs, dtype=complex).reshape(-1, 2)
        inside = (np.abs(pts.real) <= r) & (pts.imag >= 1 / r) & (pts.imag <= r)
        if not inside.all():
            raise DomainError("sample points must lie in R(r)")
    _, dz = chain.inverse(pts[:, 0])
    _, dw = chain.inverse(pts[:, 1])
    logratio = np.log(np.abs(dw)) - np.log(np.abs(dz))
    worst = float(np.max(np.abs(logratio)))
    bound = alpha * math.log(2 * r)
    return {
        "r": r,
        "n_pairs": int(pts.shape[0]),
        "max_log_ratio": worst,
        "max_ratio": math.exp(worst),
        "alpha": alpha,
        "reference_log_bound": bound,
        "within_reference": worst <= bound,
    }
