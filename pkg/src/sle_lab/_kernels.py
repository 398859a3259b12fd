"""Compiled inner loops for slit-chain composition."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _slit_root(zx, zy, r):
    """Real and imaginary parts of ``sqrt(zeta^2 - r^2)`` with ``Im >= 0``.

    The real part takes the sign of ``Re zeta`` so boundary points stay on
    their side of the slit.
    """
    A = (zx - r) * (zx + r) - zy * zy
    B = abs(2.0 * zx * zy)
    m = math.hypot(A, B)
    if A >= 0.0:
        sr = math.sqrt(0.5 * (m + A))
        si = B / (2.0 * sr) if sr > 0.0 else 0.0
    else:
        si = math.sqrt(0.5 * (m - A))
        sr = B / (2.0 * si)
    if zx < 0.0:
        sr = -sr
    return sr, si


@njit(cache=True)
def inverse_suffix(du, rc, starts, xs, ys, deriv):
    """Compose inverse slit maps on points sorted by time index.

    Map ``j`` acts on points ``starts[j]:``.  Returns real/imag parts of the
    images and, if ``deriv``, of the accumulated derivative.
    """
    n = xs.size
    x = xs.copy()
    y = ys.copy()
    dx = np.ones(n)
    dy = np.zeros(n)
    for j in range(du.size - 1, -1, -1):
        u = du[j]
        r = rc[j]
        for k in range(starts[j], n):
            zx = x[k] - u
            zy = y[k]
            sr, si = _slit_root(zx, zy, r)
            if deriv:
                # multiply by zeta / s
                den = sr * sr + si * si
                fx = (zx * sr + zy * si) / den
                fy = (zy * sr - zx * si) / den
                tx = dx[k] * fx - dy[k] * fy
                dy[k] = dx[k] * fy + dy[k] * fx
                dx[k] = tx
            x[k] = sr + u
            y[k] = si
    return x, y, dx, dy


@njit(cache=True)
def _upper_root(zx, zy):
    """``sqrt(zx + i zy)`` on the branch with nonnegative imaginary part."""
    m = math.hypot(zx, zy)
    if zx >= 0.0:
        sr = math.sqrt(0.5 * (m + zx))
        si = abs(zy) / (2.0 * sr) if sr > 0.0 else 0.0
    else:
        si = math.sqrt(0.5 * (m - zx))
        sr = abs(zy) / (2.0 * si)
    if zy < 0.0:
        sr = -sr
    return sr, si


@njit(cache=True)
def reverse_batch(U, c, z, record):
    """Exact frozen-step reverse flow of ``z`` for each driver row of ``U``.

    Step ``k`` freezes the driver at ``U[:, k-1]`` and maps
    ``Z -> sqrt(Z^2 - c[k-1])``.  Returns ``Z`` and ``log|h'|`` at the
    ``record`` indices plus per-path counts of monotonicity or bound
    violations (``Y`` not increasing, ``Psi`` increasing, ``Y^2`` above
    ``y0^2 + 2at``).
    """
    P, n1 = U.shape
    m = record.size
    Zr = np.empty((P, m), dtype=np.complex128)
    Lr = np.empty((P, m))
    viol = np.zeros(P, dtype=np.int64)
    y0 = z.imag
    for p in range(P):
        x = z.real - U[p, 0]
        y = y0
        L = 0.0
        cap = y0 * y0
        logpsi = -math.log(y0)
        i = 0
        while i < m and record[i] == 0:
            Zr[p, i] = complex(x, y)
            Lr[p, i] = 0.0
            i += 1
        for k in range(1, n1):
            r = math.sqrt(c[k - 1])
            sr, si = _slit_root(x, y, r)
            den = sr * sr + si * si
            fx = (x * sr + y * si) / den
            fy = (y * sr - x * si) / den
            L += 0.5 * math.log(fx * fx + fy * fy)
            cap += c[k - 1]
            if not si > y * (1.0 - 1e-13):
                viol[p] += 1
            if si * si > cap * (1.0 + 1e-10):
                viol[p] += 1
            lp = L - math.log(si)
            if lp > logpsi + 1e-10:
                viol[p] += 1
            logpsi = lp
            x = sr + U[p, k - 1] - U[p, k]
            y = si
            while i < m and record[i] == k:
                Zr[p, i] = complex(x, y)
                Lr[p, i] = L
                i += 1
    return Zr, Lr, viol


@njit(cache=True)
def forward_batch(U, c, z, floor, record):
    """Forward slit-chain flow of ``z`` for each driver row of ``U``.

    Step ``k`` uses ``U[:, k]`` (right endpoint).  A path stops, with all
    quantities frozen, once ``Upsilon <= floor`` or ``Y < 1e-12``.
    Returns ``Z``, ``log|g'|`` and the stop index (``-1`` if never) at the
    record indices, and per-path counts of ``Upsilon`` increases.
    """
    P, n1 = U.shape
    m = record.size
    Zr = np.empty((P, m), dtype=np.complex128)
    Lr = np.empty((P, m))
    stop = np.full(P, -1, dtype=np.int64)
    viol = np.zeros(P, dtype=np.int64)
    for p in range(P):
        g_re = z.real
        g_im = z.imag
        x = g_re - U[p, 0]
        y = g_im
        L = 0.0
        logu = math.log(y)
        i = 0
        while i < m and record[i] == 0:
            Zr[p, i] = complex(x, y)
            Lr[p, i] = 0.0
            i += 1
        stopped = y <= floor
        if stopped:
            stop[p] = 0
        for k in range(1, n1):
            if not stopped:
                u = U[p, k]
                zx = g_re - u
                zy = g_im
                sr, si = _upper_root(zx * zx - zy * zy + c[k - 1], 2.0 * zx * zy)
                den = sr * sr + si * si
                fx = (zx * sr + zy * si) / den
                fy = (zy * sr - zx * si) / den
                L += 0.5 * math.log(fx * fx + fy * fy)
                g_re = sr + u
                g_im = si
                x = sr
                y = si
                lu = math.log(y) - L if y > 0.0 else -np.inf
                if lu > logu + 1e-10:
                    viol[p] += 1
                logu = lu
                if y < 1e-12 or lu <= math.log(floor):
                    stopped = True
                    stop[p] = k
            while i < m and record[i] == k:
                Zr[p, i] = complex(x, y)
                Lr[p, i] = L
                i += 1
    return Zr, Lr, stop, viol


@njit(cache=True)
def k_advance(K, L, S, t0, dt, normals, b, a, lamperti, record, Kr, Lr, Sr, viol):
    """Advance Euler paths of ``dK = b K dt + sqrt(K^2+1) dB`` in place.

    ``L`` and ``S`` (the time change) accumulate by the trapezoid rule.
    With ``lamperti`` the step is taken on ``Z = asinh K`` where the noise is
    additive: ``dZ = (b - 1/2) tanh Z dt + dB``.  ``record`` holds local step
    numbers (1-based within this block) at which to store values into the
    next free column of ``Kr``, ``Lr``, ``Sr``.  Pathwise checks of
    ``|L| <= t``, the lower bound on ``S`` and its monotonicity are counted
    in ``viol``.
    """
    P, n = normals.shape
    sq = math.sqrt(dt)
    m = record.size
    fac = math.exp(2.0 * a * dt)
    E0 = math.exp(2.0 * a * t0)
    for p in range(P):
        k = K[p]
        l = L[p]
        s = S[p]
        E = E0
        f_old = (k * k - 1.0) / (k * k + 1.0)
        e_old = E * (k * k + 1.0)
        i = 0
        for j in range(n):
            if lamperti:
                zz = math.asinh(k)
                zz += (b - 0.5) * math.tanh(zz) * dt + sq * normals[p, j]
                k = math.sinh(zz)
            else:
                k += b * k * dt + math.sqrt(k * k + 1.0) * sq * normals[p, j]
            t = t0 + (j + 1) * dt
            E *= fac
            k2 = k * k + 1.0
            f_new = 1.0 - 2.0 / k2
            e_new = E * k2
            l += 0.5 * dt * (f_old + f_new)
            s_new = s + 0.5 * dt * (e_old + e_new)
            if abs(l) > t * (1.0 + 1e-12):
                viol[p] += 1
            if not s_new > s:
                viol[p] += 1
            lower = (E - 1.0) / (2.0 * a) if a != 0.0 else t
            if s_new < lower * (1.0 - 1e-9):
                viol[p] += 1
            s = s_new
            f_old = f_new
            e_old = e_new
            while i < m and record[i] == j + 1:
                Kr[p, i] = k
                Lr[p, i] = l
                Sr[p, i] = s
                i += 1
        K[p] = k
        L[p] = l
        S[p] = s


@njit(cache=True)
def theta_survival(normals, theta0, ds, b, record):
    """Survival weights of ``dTheta = b cot(Theta) ds + dW`` killed at 0 and pi.

    Each Euler step multiplies the weight by the probability that a Brownian
    bridge between the two endpoints stays inside ``(0, pi)``.  Returns the
    weights at the ``record`` step numbers.
    """
    P, n = normals.shape
    m = record.size
    out = np.zeros((P, m))
    sq = math.sqrt(ds)
    for p in range(P):
        th = theta0
        w = 1.0
        i = 0
        while i < m and record[i] == 0:
            out[p, i] = w
            i += 1
        for j in range(n):
            if w == 0.0:
                break
            nxt = th + b * math.cos(th) / math.sin(th) * ds + sq * normals[p, j]
            if nxt <= 0.0 or nxt >= math.pi:
                w = 0.0
            else:
                w *= 1.0 - math.exp(-2.0 * th * nxt / ds)
                w *= 1.0 - math.exp(-2.0 * (math.pi - th) * (math.pi - nxt) / ds)
                th = nxt
            while i < m and record[i] == j + 1:
                out[p, i] = w
                i += 1
    return out


@njit(cache=True)
def theta_advance(th, ds, normals, b):
    """Euler steps of ``dTheta = b cot(Theta) ds + dW`` reflected into ``(0, pi)``."""
    P, n = normals.shape
    sq = math.sqrt(ds)
    for p in range(P):
        x = th[p]
        for j in range(n):
            x += b * math.cos(x) / math.sin(x) * ds + sq * normals[p, j]
            while x <= 0.0 or x >= math.pi:
                if x <= 0.0:
                    x = -x
                if x >= math.pi:
                    x = 2.0 * math.pi - x
            if x == 0.0:
                x = 1e-300
        th[p] = x


@njit(cache=True)
def upsilon_nodes(du, c, zx, zy, swallow_eps):
    """``log Upsilon_t`` for many points under one forward chain.

    A point whose imaginary part drops below ``swallow_eps`` keeps its last
    value.
    """
    n = zx.size
    out = np.empty(n)
    for p in range(n):
        gx = zx[p]
        gy = zy[p]
        L = 0.0
        lu = math.log(gy)
        for j in range(du.size):
            u = du[j]
            x = gx - u
            sr, si = _upper_root(x * x - gy * gy + c[j], 2.0 * x * gy)
            den = sr * sr + si * si
            fx = (x * sr + gy * si) / den
            fy = (gy * sr - x * si) / den
            L += 0.5 * math.log(fx * fx + fy * fy)
            if si < swallow_eps:
                break
            gx = sr + u
            gy = si
            lu = math.log(gy) - L
        out[p] = lu
    return out
