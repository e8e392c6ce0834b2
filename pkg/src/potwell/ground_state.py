"""Minimisation of the Sobolev-type quotient ``Q(u) = A(u) / B(u)^(1/p)``.

``Q`` is scale free, so its infimum over the grid estimates the sharp
constant and, through the well-depth power law, the critical level.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .functionals import Constants, Exponents, compute_B, critical_level, is_zero
from .grid import Field, SpectralField, dst_forward, dst_inverse, grad_norm_sq, norm
from .riesz import RieszKernel, riesz_apply

log = logging.getLogger(__name__)


class LineSearchStall(RuntimeError):
    pass


@dataclass
class QuotientResult:
    q_min: float
    minimizer: Field
    m_est: float
    iterations: int
    grad_norm_final: float
    q_log: list = field(default_factory=list)
    stalled: bool = False


def quotient(u: Field, kernel: RieszKernel, exps: Exponents) -> float:
    if is_zero(u):
        raise ValueError("quotient is undefined for the zero field")
    return grad_norm_sq(u) / compute_B(u, kernel, exps) ** exps.quotient_power


def _parts(u: Field, kernel: RieszKernel, exps: Exponents):
    """A, B and the nonlinear term at ``u`` from one convolution."""
    a_abs = np.abs(u.values)
    g = a_abs ** exps.p
    phi = riesz_apply(kernel, g).values
    b = u.domain.cell_volume * float(np.sum(g * phi))
    f = phi * a_abs ** (exps.p - 2) * u.values
    return grad_norm_sq(u), b, f


def minimize_quotient(u_init: Field, max_iter: int, tol: float, kernel: RieszKernel,
                      exps: Exponents, consts: Constants | None = None,
                      max_backtracks: int = 30) -> QuotientResult:
    """Preconditioned descent on ``Q`` with backtracking.

    The search direction is the gradient of ``Q`` preconditioned by the inverse
    Dirichlet Laplacian,

        d = u - (A/B) (-Delta)^-1 f(u),

    up to a positive factor, so the full step ``s = 1`` is the normalised
    fixed-point update ``u <- (A/B) (-Delta)^-1 f(u)``.  Each accepted step
    strictly decreases ``Q``; iterates are renormalised to unit L2 norm.
    """
    if is_zero(u_init):
        raise ValueError("initial field must be nonzero")
    domain = u_init.domain
    lam = domain.eigenvalues

    u = u_init / norm(u_init, 2)
    a, b, f = _parts(u, kernel, exps)
    q = a / b ** exps.quotient_power
    q_log = [q]
    best_q, best_u = q, u
    s = 1.0
    stalled = False
    gnorm = np.nan
    it = 0
    for it in range(1, max_iter + 1):
        uh = dst_forward(u).coeffs
        target = (a / b) * dst_forward(Field(domain, f)).coeffs / lam
        d = uh - target
        gnorm = float(np.sqrt(domain.mode_weight * np.sum(lam * d ** 2)))
        s = min(1.0, 2.0 * s)
        for _ in range(max_backtracks):
            cand = dst_inverse(SpectralField(domain, uh - s * d))
            cand = cand / norm(cand, 2)
            a_c, b_c, f_c = _parts(cand, kernel, exps)
            q_c = a_c / b_c ** exps.quotient_power if b_c > 0 else np.inf
            if q_c < q:
                break
            s *= 0.5
        else:
            stalled = True
            log.info("line search stalled after %d iterations", it)
            break
        rel = (q - q_c) / q
        u, a, b, f, q = cand, a_c, b_c, f_c, q_c
        q_log.append(q)
        if q < best_q:
            best_q, best_u = q, u
        if rel < tol:
            break
    return QuotientResult(
        q_min=best_q,
        minimizer=best_u,
        m_est=critical_level(best_q, exps.mu),
        iterations=it,
        grad_norm_final=gnorm,
        q_log=q_log,
        stalled=stalled,
    )
