"""Energy, Nehari functional, potential-well classification and constants.

Everything here is for ``N = 3`` and ``0 < mu < 3``, where the critical
exponent is ``p = (2N - mu)/(N - 2) = 6 - mu``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from .grid import BoxDomain, Field, from_function, grad_norm_sq, norm
from .riesz import RieszKernel, check_mu, riesz_apply

N = 3
ZERO_TOL = 1e-14


class WellClass(enum.Enum):
    IN_W = "W"
    IN_V = "V"
    NEITHER = "N"
    ZERO = "Z"


@dataclass(frozen=True)
class Exponents:
    mu: float

    def __post_init__(self):
        check_mu(self.mu)

    @property
    def p(self) -> float:
        return exponent_p(self.mu)

    @property
    def quotient_power(self) -> float:
        """``(N - 2)/(2N - mu)``, the power of ``B`` in the Sobolev-type quotient."""
        return (N - 2) / (2 * N - self.mu)

    @property
    def c0_factor(self) -> float:
        p = self.p
        return 2 * p / (p - 1)


@dataclass(frozen=True)
class Constants:
    mu: float
    c_hls: float
    s_sob: float
    s_hl: float
    m_mu: float


@dataclass(frozen=True)
class EnergyReport:
    a: float
    b: float
    j: float
    i: float
    klass: WellClass


def exponent_p(mu: float) -> float:
    mu = check_mu(mu)
    return (2 * N - mu) / (N - 2)


def hls_constant(mu: float) -> float:
    """Sharp HLS constant ``C(N, mu)`` for ``t = r = 2N/(2N - mu)``."""
    mu = check_mu(mu)
    return float(
        np.pi ** (mu / 2)
        * gamma(N / 2 - mu / 2)
        / gamma(N - mu / 2)
        * (gamma(N / 2) / gamma(N)) ** (-1 + mu / N)
    )


def sobolev_constant() -> float:
    """Best constant ``S`` of ``|grad u|_2^2 >= S |u|_6^2`` in R^3."""
    return float(np.pi * N * (N - 2) * (gamma(N / 2) / gamma(N)) ** (2 / N))


def critical_level(s_hl: float, mu: float) -> float:
    """Depth of the potential well as a function of the quotient infimum."""
    return (N - mu + 2) / (2 * (2 * N - mu)) * s_hl ** ((2 * N - mu) / (N - mu + 2))


def constants_build(mu: float) -> Constants:
    mu = check_mu(mu)
    c = hls_constant(mu)
    s = sobolev_constant()
    s_hl = s / c ** ((N - 2) / (2 * N - mu))
    return Constants(mu=mu, c_hls=c, s_sob=s, s_hl=s_hl, m_mu=critical_level(s_hl, mu))


def compute_B(u: Field, kernel: RieszKernel, exps: Exponents) -> float:
    if abs(kernel.mu - exps.mu) > 1e-15:
        raise ValueError("kernel and exponents disagree on mu")
    g = np.abs(u.values) ** exps.p
    phi = riesz_apply(kernel, g).values
    # the kernel is positive, so B >= 0 up to rounding
    return max(0.0, float(u.domain.cell_volume * np.sum(g * phi)))


def classify(a: float, b: float, j: float, i: float, m_mu: float, zero: bool) -> WellClass:
    if zero:
        return WellClass.ZERO
    if j < m_mu and i > 0:
        return WellClass.IN_W
    if j < m_mu and i < 0:
        return WellClass.IN_V
    return WellClass.NEITHER


def energy_from_ab(a: float, b: float, exps: Exponents, consts: Constants, zero: bool = False) -> EnergyReport:
    j = 0.5 * a - b / (2 * exps.p)
    i = a - b
    return EnergyReport(a, b, j, i, classify(a, b, j, i, consts.m_mu, zero))


def is_zero(u: Field) -> bool:
    return norm(u, np.inf) < ZERO_TOL * max(1.0, u.domain.L)


def energy_report(u: Field, kernel: RieszKernel, exps: Exponents, consts: Constants) -> EnergyReport:
    return energy_from_ab(grad_norm_sq(u), compute_B(u, kernel, exps), exps, consts, is_zero(u))


def in_W(klass: WellClass) -> bool:
    """Membership in the stable set, which contains the zero field."""
    return klass in (WellClass.IN_W, WellClass.ZERO)


def nehari_scale(a: float, b: float, exps: Exponents) -> float:
    """Unique ``theta > 0`` with ``I(theta u) = 0``."""
    if a <= 0 or b <= 0:
        raise ValueError(f"need A > 0 and B > 0, got A={a}, B={b}")
    return (a / b) ** (1.0 / (2 * exps.p - 2))


def bubble(domain: BoxDomain, center, width: float) -> Field:
    """Aubin-Talenti profile ``(b / (b^2 + |x - a|^2))^(1/2)`` sampled on the grid."""
    if width <= 0:
        raise ValueError("bubble width must be positive")
    a = np.asarray(center, dtype=float)
    if np.any(a <= 0) or np.any(a >= domain.L):
        raise ValueError("bubble center must lie inside the box")
    return from_function(
        domain,
        lambda x, y, z: np.sqrt(width / (width ** 2 + (x - a[0]) ** 2 + (y - a[1]) ** 2 + (z - a[2]) ** 2)),
    )


@dataclass(frozen=True)
class HLSReport:
    lhs: float
    rhs: float
    ok: bool


def hls_check(u: Field, kernel: RieszKernel, exps: Exponents, consts: Constants) -> HLSReport:
    """``B(u) <= C(N, mu) |u|_6^(2p)``, the HLS bound with ``f = h = |u|^p``."""
    lhs = compute_B(u, kernel, exps)
    rhs = consts.c_hls * norm(u, 2 * N / (N - 2)) ** (2 * exps.p)
    return HLSReport(lhs, rhs, lhs <= rhs + 1e-8)


@dataclass(frozen=True)
class C0Estimate:
    value: float
    provisional: bool


def c0_estimate(j_values, exps: Exponents, settle_tol: float = 1e-3) -> C0Estimate:
    """``(2p/(p-1)) lim J`` from the last recorded energy.

    The estimate is flagged provisional when ``J`` still moved by more than
    ``settle_tol * max(1, |J|)`` over the last 10% of the records.
    """
    j = np.asarray(j_values, dtype=float)
    if j.size == 0:
        raise ValueError("empty energy trajectory")
    tail = j[-max(2, int(np.ceil(0.1 * j.size))):]
    drift = float(tail.max() - tail.min()) if tail.size > 1 else np.inf
    settled = drift <= settle_tol * max(1.0, abs(j[-1]))
    return C0Estimate(max(0.0, exps.c0_factor * float(j[-1])), not settled)
