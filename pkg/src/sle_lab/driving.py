"""Driving functions on uniform capacity-time grids.

Random streams come from numpy's ``PCG64`` bit generator and
``Generator.standard_normal``.  Each path draws from its own stream, seeded
by ``SeedSequence([seed, path_index])``, so ensemble results do not depend on
how paths are chunked or distributed over workers.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import DomainError

RNG_ALGORITHM = f"numpy-{np.__version__}/PCG64/standard_normal"
DRIVER_MAGIC = b"SLEDRV1"


def path_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for path ``index`` of the ensemble identified by ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def grid_steps(T: float, dt: float) -> int:
    if not (dt > 0 and T > 0):
        raise DomainError(f"T and dt must be positive (T={T!r}, dt={dt!r})")
    if dt > T * (1 + 1e-12):
        raise DomainError(f"dt={dt!r} exceeds T={T!r}")
    n = round(T / dt)
    if abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise DomainError(f"T={T!r} is not an integer multiple of dt={dt!r}")
    return int(n)


@dataclass(frozen=True)
class DrivingPath:
    dt: float
    values: np.ndarray
    a: float | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise DomainError("a driving path needs at least two samples")
        if values[0] != 0.0:
            raise DomainError("driving paths start at 0")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def T(self) -> float:
        return self.dt * self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.size)

    def index_of(self, t: float) -> int:
        """Grid index of capacity time ``t``; raises if ``t`` is off the grid."""
        k = round(t / self.dt)
        if abs(k * self.dt - t) > 1e-9 * max(self.dt, abs(t)) or not 0 <= k <= self.n_steps:
            raise DomainError(f"time {t!r} is not on the grid (dt={self.dt!r}, T={self.T!r})")
        return int(k)

    def with_a(self, a: float) -> "DrivingPath":
        return DrivingPath(self.dt, self.values, a=a, seed=self.seed)

    # -- serialization -------------------------------------------------
    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.values])
        np.savetxt(path, data, delimiter=",", header="t,u", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, a: float | None = None) -> "DrivingPath":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t, u = data[:, 0], data[:, 1]
        dt = float(t[1] - t[0])
        if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
            raise DomainError("CSV driver is not on a uniform grid")
        return cls(dt, u, a=a)

    def to_bytes(self) -> bytes:
        header = struct.pack(
            "<ddqQ",
            self.dt,
            math.nan if self.a is None else float(self.a),
            -1 if self.seed is None else int(self.seed),
            self.values.size,
        )
        return DRIVER_MAGIC + header + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "DrivingPath":
        if not blob.startswith(DRIVER_MAGIC):
            raise DomainError("not a SLEDRV1 container")
        off = len(DRIVER_MAGIC)
        dt, a, seed, n = struct.unpack_from("<ddqQ", blob, off)
        off += struct.calcsize("<ddqQ")
        values = np.frombuffer(blob, dtype="<f8", count=n, offset=off).astype(float)
        return cls(dt, values, a=None if math.isnan(a) else a, seed=None if seed < 0 else seed)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "DrivingPath":
        return cls.from_bytes(Path(path).read_bytes())


def _bridge_refine(values: np.ndarray, dt, normals: np.ndarray) -> np.ndarray:
    """Insert Brownian-bridge midpoints along the last axis.

    ``dt`` is the step (scalar or per-interval array) of ``values``.
    """
    left, right = values[..., :-1], values[..., 1:]
    mid = 0.5 * (left + right) + 0.5 * np.sqrt(dt) * normals
    out = np.empty(values.shape[:-1] + (2 * values.shape[-1] - 1,))
    out[..., 0::2] = values
    out[..., 1::2] = mid
    return out


def brownian_levels(
    seed: int, index: int, n_steps: int, dt: float, levels: int = 0
) -> list[np.ndarray]:
    """One path of ``U = -B`` at ``levels + 1`` nested resolutions.

    Level 0 has ``n_steps`` steps of size ``dt``; level ``k`` is its
    ``k``-fold Brownian-bridge refinement.  Level 0 is identical whatever
    ``levels`` is, because the coarse draws come first in the stream.
    """
    rng = path_rng(seed, index)
    inc = rng.standard_normal(n_steps) * math.sqrt(dt)
    u = np.empty(n_steps + 1)
    u[0] = 0.0
    np.cumsum(-inc, out=u[1:])
    out = [u]
    h = dt
    for _ in range(levels):
        u = _bridge_refine(u, h, rng.standard_normal(u.size - 1))
        h /= 2
        out.append(u)
    return out


def brownian_on_grid(seed: int, index: int, steps: np.ndarray, levels: int = 0) -> list[np.ndarray]:
    """Like :func:`brownian_levels` for a grid of (possibly unequal) ``steps``."""
    steps = np.asarray(steps, dtype=float)
    rng = path_rng(seed, index)
    inc = rng.standard_normal(steps.size) * np.sqrt(steps)
    u = np.empty(steps.size + 1)
    u[0] = 0.0
    np.cumsum(-inc, out=u[1:])
    out = [u]
    h = steps
    for _ in range(levels):
        u = _bridge_refine(u, h, rng.standard_normal(u.size - 1))
        h = np.repeat(h / 2, 2)
        out.append(u)
    return out


def brownian_matrix(
    seed: int, indices, n_steps: int, dt: float, levels: int = 0
) -> list[np.ndarray]:
    """Stack :func:`brownian_levels` for several path indices (rows)."""
    rows = [brownian_levels(seed, i, n_steps, dt, levels) for i in indices]
    return [np.stack([r[k] for r in rows]) for k in range(levels + 1)]


def sample_brownian_driver(
    T: float, dt: float, seed: int, a: float | None = None, index: int = 0
) -> DrivingPath:
    """Standard Brownian driver ``U_t = -B_t`` with unit diffusivity."""
    n = grid_steps(T, dt)
    (u,) = brownian_levels(seed, index, n, dt)
    return DrivingPath(dt, u, a=a, seed=seed)


def constant_driver(T: float, dt: float, value: float = 0.0, a: float | None = None) -> DrivingPath:
    if value != 0:
        raise DomainError("only the zero constant driver is supported (U_0 must be 0)")
    n = grid_steps(T, dt)
    return DrivingPath(dt, np.zeros(n + 1), a=a)


def refine_driver(path: DrivingPath, seed: int) -> DrivingPath:
    """Halve ``dt`` by Brownian-bridge midpoint insertion."""
    normals = path_rng(seed, 0).standard_normal(path.n_steps)
    return DrivingPath(path.dt / 2, _bridge_refine(path.values, path.dt, normals), a=path.a)


def reverse_driver(path: DrivingPath, split: float) -> tuple[DrivingPath, DrivingPath]:
    """Time reversal of ``V`` on ``[0, S+T]`` with split ``S``.

    Returns ``U_t = V_{S+T-t} - V_{S+T}`` on ``[0, S+T]`` and
    ``U~_t = U_{T+t} - U_T`` on ``[0, S]``.
    """
    k_split = path.index_of(split)
    if k_split == 0:
        raise DomainError("split must be positive")
    v = path.values
    u = v[::-1] - v[-1]
    k_T = path.n_steps - k_split
    u_tilde = u[k_T:] - u[k_T]
    return DrivingPath(path.dt, u, a=path.a), DrivingPath(path.dt, u_tilde, a=path.a)
