"""Closed-form exponent algebra for chordal SLE in the a = 2/kappa parametrization.

Everything here is a pure function of its arguments.  Names follow the
usual conventions: ``a = 2/kappa``, ``d = 1 + kappa/8`` (the dimension),
``beta = d - 3/2`` and ``xi = d(d - 2) + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class SleParams:
    kappa: float
    a: float
    d: float
    beta: float
    xi: float
    dimension_valid: bool

    @property
    def flags(self) -> tuple[str, ...]:
        return () if self.dimension_valid else ("dimension-exponents-invalid",)


@dataclass(frozen=True)
class MartingaleExponents:
    r: float
    lam: float
    zeta: float
    q: float
    theta: float
    mu: float
    recurrent: bool


@dataclass(frozen=True)
class InverseExponents:
    lam: float
    r: float
    zeta: float
    lambda_c: float
    zeta_c: float


@dataclass(frozen=True)
class MomentPair:
    delta: float
    p: float
    theta_delta: float
    valid: bool


def derive_exponents(kappa: float) -> SleParams:
    """Return all kappa-derived exponents.

    For ``kappa >= 8`` the dimension exponents are still computed from the
    same formulas but ``dimension_valid`` is False.
    """
    if not kappa > 0 or not math.isfinite(kappa):
        raise DomainError(f"kappa must be a positive finite number, got {kappa!r}")
    a = 2.0 / kappa
    d = 1.0 + kappa / 8.0
    beta = d - 1.5
    xi = d * (d - 2.0) + 1.0
    return SleParams(kappa=kappa, a=a, d=d, beta=beta, xi=xi, dimension_valid=kappa < 8)


def params_from_a(a: float) -> SleParams:
    if not a > 0:
        raise DomainError(f"a must be positive, got {a!r}")
    return derive_exponents(2.0 / a)


def dimension(a: float) -> float:
    return 1.0 + 1.0 / (4.0 * a)


def lambda_of_r(r: float, a: float) -> float:
    return r * (1.0 + 1.0 / (2.0 * a)) - r * r / (4.0 * a)


def martingale_exponents(r: float, a: float) -> MartingaleExponents:
    """Exponents of the reverse-flow martingale indexed by ``r``.

    ``q <= 0`` is allowed; the result then carries ``recurrent=False``.
    """
    if not a > 0:
        raise DomainError(f"a must be positive, got {a!r}")
    lam = lambda_of_r(r, a)
    q = 2.0 * a + 0.5 - r
    theta = r / 2.0 + q * r + r * r / 2.0
    zeta = r - theta
    mu = (1.0 - 2.0 * q) / (1.0 + 2.0 * q) if q != -0.5 else math.inf
    return MartingaleExponents(
        r=r, lam=lam, zeta=zeta, q=q, theta=theta, mu=mu, recurrent=q > 0
    )


def y_exponent(r: float, a: float) -> float:
    """Power of ``Y_t`` in ``M_t = |h'|^lambda Y^(r - r^2/4a) (R^2+1)^(r/2)``."""
    return r - r * r / (4.0 * a)


def inverse_exponents(lam: float, a: float) -> InverseExponents:
    """Invert ``lambda(r)`` on the branch ``0 <= r <= 2a + 1``."""
    if not a > 0:
        raise DomainError(f"a must be positive, got {a!r}")
    radicand = (1.0 + 1.0 / (2.0 * a)) ** 2 - lam / a
    if radicand < 0:
        raise DomainError(
            f"lambda={lam!r} exceeds the maximum a(1 + 1/(2a))^2 = {a * (1 + 1 / (2 * a)) ** 2!r}"
        )
    r = 2.0 * a + 1.0 - 2.0 * a * math.sqrt(radicand)
    zeta = lam - r / (2.0 * a)
    return InverseExponents(
        lam=lam,
        r=r,
        zeta=zeta,
        lambda_c=a + 3.0 / (16.0 * a) + 1.0,
        zeta_c=a - 1.0 / (16.0 * a),
    )


def zeta_of_lambda(lam: float, a: float) -> float:
    return inverse_exponents(lam, a).zeta


def moment_pair(delta: float, q: float) -> MomentPair:
    """Exponential-moment parameters ``p(delta)`` and ``theta(delta)``.

    ``valid`` is ``delta < q``, the range where the stationary-moment bounds apply.
    ``theta = 2p - delta/2 = q delta - delta^2/2``; this is the value that
    makes ``e^{pL_t}(K_t^2+1)^{delta/2}e^{(theta-p)t}`` driftless.
    """
    p = (1.0 + 2.0 * q) / 4.0 * delta - delta * delta / 4.0
    theta = 2.0 * p - delta / 2.0
    return MomentPair(delta=delta, p=p, theta_delta=theta, valid=delta < q)


def mu_of_q(q: float) -> float:
    return (1.0 - 2.0 * q) / (1.0 + 2.0 * q)


def supermartingale_condition(theta: float, delta: float, a: float) -> bool:
    """``2 a theta >= max(delta, delta - 4 a delta + delta^2)``."""
    return 2.0 * a * theta >= max(delta, delta - 4.0 * a * delta + delta * delta)


def upper_bound_r_max(a: float) -> float:
    """Largest admissible ``r`` for the fixed-time moment upper bound."""
    if a >= 0.25:
        return 6.0 * a - 2.0 * math.sqrt(5.0 * a * a - a)
    return 2.0 * a + 0.5
