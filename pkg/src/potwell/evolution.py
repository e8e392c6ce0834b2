"""Time integration of ``u_t - Delta u = (|x|^-mu * |u|^p) |u|^(p-2) u``.

The heat semigroup is exact in the sine basis.  The nonlinear part is
advanced with an exponential Heun pair: an exponential Euler predictor and a
trapezoidal corrector on the Duhamel integral, whose difference drives the
step-size controller.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .functionals import (
    Constants,
    EnergyReport,
    Exponents,
    WellClass,
    energy_from_ab,
    in_W,
    is_zero,
)
from .grid import BoxDomain, Field, SpectralField, dst_forward, dst_inverse, grad_norm_sq, norm
from .riesz import RieszKernel, riesz_apply


class BlowUpSignal(ArithmeticError):
    """Raised when the nonlinear term overflows."""


class NonConvergence(RuntimeError):
    def __init__(self, message, ratios=()):
        super().__init__(message)
        self.ratios = list(ratios)


@dataclass(frozen=True)
class SolverConfig:
    dt_init: float = 1e-6
    dt_min: float = 1e-300
    dt_max: float = 1e-2
    safety: float = 0.9
    t_end: float = 0.2
    blowup_factor: float = 1e6
    record_every: int = 4
    nonlinearity_on: bool = True
    tol_step: float = 1e-4
    max_steps: int = 200_000
    stop_on_entry: bool = False
    control_dissipation: bool = True

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.safety < 1:
            raise ValueError("safety must lie in (0, 1)")
        for name in ("t_end", "blowup_factor", "tol_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.record_every < 1 or self.max_steps < 1:
            raise ValueError("record_every and max_steps must be positive")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    a: float
    b: float
    j: float
    i: float
    l2: float
    linf: float
    dt: float
    dissipation: float
    klass: WellClass


class Verdict(enum.Enum):
    HORIZON_REACHED = "HorizonReached"
    BLOW_UP = "BlowUp"
    ENTERED_W = "EnteredW"
    ENTERED_V = "EnteredV"
    STEP_LIMIT = "StepLimit"


@dataclass
class RunOutcome:
    verdict: Verdict
    records: list
    final: Field
    t_blowup: float | None = None
    entered_w: float | None = None
    entered_v: float | None = None
    accepted_steps: int = 0
    rejected_steps: int = 0

    @property
    def t_end(self) -> float:
        return self.records[-1].t

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def semigroup_apply(uh: SpectralField, t: float) -> SpectralField:
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    return SpectralField(uh.domain, uh.coeffs * np.exp(-uh.domain.eigenvalues * t))


@dataclass
class _Nonlinear:
    """``f(u)`` and ``B(u)`` from a single Riesz convolution."""

    f: np.ndarray
    b: float


def _nonlinear(values: np.ndarray, kernel: RieszKernel, exps: Exponents) -> _Nonlinear:
    h3 = kernel.domain.cell_volume
    p = exps.p
    try:
        with np.errstate(over="raise", invalid="raise"):
            a = np.abs(values)
            g = a ** p
            phi = riesz_apply(kernel, g).values
            f = phi * a ** (p - 2) * values
            b = h3 * float(np.sum(g * phi))
    except FloatingPointError as exc:
        raise BlowUpSignal(str(exc)) from exc
    if not (np.isfinite(b) and np.all(np.isfinite(f))):
        raise BlowUpSignal("non-finite nonlinear term")
    return _Nonlinear(f, max(b, 0.0))


def nonlinear_term(u: Field, kernel: RieszKernel, exps: Exponents) -> Field:
    return Field(u.domain, _nonlinear(u.values, kernel, exps).f)


def _step_spectral(uh, f0h, dt, cfg, kernel, exps):
    """One exponential Heun step in coefficient space.

    Returns the corrected coefficients and the relative predictor-corrector
    gap.  The nonlinear term at the new state is left to the caller.
    """
    E = np.exp(-uh.domain.eigenvalues * dt)
    if not cfg.nonlinearity_on:
        return SpectralField(uh.domain, E * uh.coeffs), 0.0
    pred = E * (uh.coeffs + dt * f0h)
    pred_field = dst_inverse(SpectralField(uh.domain, pred))
    f1h = dst_forward(Field(uh.domain, _nonlinear(pred_field.values, kernel, exps).f)).coeffs
    corr = E * uh.coeffs + 0.5 * dt * (E * f0h + f1h)
    if not np.all(np.isfinite(corr)):
        raise BlowUpSignal("non-finite corrector")
    diff = math.sqrt(float(np.sum((corr - pred) ** 2)))
    scale = math.sqrt(float(np.sum(corr ** 2)))
    err = diff / scale if scale > 0 else 0.0
    return SpectralField(uh.domain, corr), err


def dissipation_defect(old: np.ndarray, new: np.ndarray, eigenvalues: np.ndarray, dt: float) -> float:
    """Relative shortfall of the difference-quotient dissipation over one step.

    For a mode decaying at rate ``lam`` the exact ``int |u_t|^2`` exceeds
    ``|du|^2 / dt`` by the factor ``(x/2) coth(x/2)``, ``x = lam dt``.
    """
    d2 = (new - old) ** 2
    total = float(np.sum(d2))
    if total == 0.0:
        return 0.0
    half = 0.5 * eigenvalues * dt
    with np.errstate(over="ignore"):
        excess = np.where(half > 1e-4, half / np.tanh(half) - 1.0, half ** 2 / 3.0)
    return float(np.sum(d2 * excess)) / total


def step(u: Field, dt: float, cfg: SolverConfig, kernel: RieszKernel, exps: Exponents):
    """Advance ``u`` by ``dt``; returns ``(u_new, error_estimate)``.

    Raises :class:`BlowUpSignal` when the nonlinear term overflows.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    uh = dst_forward(u)
    f0h = 0.0
    if cfg.nonlinearity_on:
        f0h = dst_forward(Field(u.domain, _nonlinear(u.values, kernel, exps).f)).coeffs
    new_h, err = _step_spectral(uh, f0h, dt, cfg, kernel, exps)
    return dst_inverse(new_h), err


def _record(t, uh, u_vals, b, dt, diss, exps, consts) -> TrajectoryRecord:
    a = grad_norm_sq(uh)
    domain = uh.domain
    f = Field(domain, u_vals)
    rep = energy_from_ab(a, b, exps, consts, zero=is_zero(f))
    return TrajectoryRecord(
        t=t, a=rep.a, b=rep.b, j=rep.j, i=rep.i,
        l2=norm(f, 2), linf=norm(f, np.inf),
        dt=dt, dissipation=diss, klass=rep.klass,
    )


def _tail_estimate(dts) -> float:
    """Remaining time if the last step sizes keep shrinking geometrically."""
    if len(dts) < 3:
        return 0.0
    d = np.asarray(dts[-6:], dtype=float)
    r = float(np.exp(np.mean(np.log(d[1:] / d[:-1]))))
    if not r < 1:
        return 0.0
    return d[-1] * r / (1 - r)


def integrate(u0: Field, cfg: SolverConfig, kernel: RieszKernel, exps: Exponents, consts: Constants) -> RunOutcome:
    """Adaptive exponential integration from ``u0`` up to ``cfg.t_end``."""
    domain = u0.domain
    t = 0.0
    dt = cfg.dt_init
    diss = 0.0
    uh = dst_forward(u0)
    u_vals = u0.values.copy()
    linf0 = norm(u0, np.inf)

    def blowup(t_est, records, vals, n_acc, n_rej):
        out = RunOutcome(Verdict.BLOW_UP, records, Field(domain, vals), t_blowup=t_est,
                         accepted_steps=n_acc, rejected_steps=n_rej)
        _annotate(out)
        return out

    # with the nonlinearity switched off the model has no B term at all
    try:
        nl = _nonlinear(u_vals, kernel, exps) if cfg.nonlinearity_on else _Nonlinear(np.zeros_like(u_vals), 0.0)
    except BlowUpSignal:
        return blowup(0.0, [], u_vals, 0, 0)
    records = [_record(0.0, uh, u_vals, nl.b, 0.0, 0.0, exps, consts)]
    if cfg.stop_on_entry and (out := _entry_stop(records, u_vals, domain)):
        return out

    f0h = dst_forward(Field(domain, nl.f)).coeffs if cfg.nonlinearity_on else 0.0
    n_acc = n_rej = 0
    dts: list[float] = []
    linfs: list[float] = [linf0]
    since_record = 0
    last_dt = 0.0

    while t < cfg.t_end:
        if n_acc + n_rej >= cfg.max_steps:
            vals = u_vals if u_vals is not None else dst_inverse(uh).values
            out = RunOutcome(Verdict.STEP_LIMIT, records, Field(domain, vals),
                             accepted_steps=n_acc, rejected_steps=n_rej)
            _annotate(out)
            return out
        h = min(dt, cfg.t_end - t)
        try:
            new_h, err = _step_spectral(uh, f0h, h, cfg, kernel, exps)
        except BlowUpSignal:
            if h > cfg.dt_min:
                n_rej += 1
                dt = max(0.1 * h, cfg.dt_min)
                continue
            return blowup(t, records, u_vals, n_acc, n_rej)
        if cfg.control_dissipation:
            err = max(err, dissipation_defect(uh.coeffs, new_h.coeffs, domain.eigenvalues, h))
        if err > cfg.tol_step and h > cfg.dt_min:
            n_rej += 1
            dt = max(cfg.dt_min, h * max(0.1, cfg.safety * math.sqrt(cfg.tol_step / err)))
            continue

        # the free flow cannot blow up, so physical values are only needed at records
        new_vals = dst_inverse(new_h).values if cfg.nonlinearity_on else None
        nl_new = nl
        try:
            if cfg.nonlinearity_on:
                nl_new = _nonlinear(new_vals, kernel, exps)
        except BlowUpSignal:
            return blowup(t + h + _tail_estimate(dts + [h]), records, u_vals, n_acc, n_rej)
        diss += domain.mode_weight * float(np.sum((new_h.coeffs - uh.coeffs) ** 2)) / h
        t = cfg.t_end if h < dt or t + h >= cfg.t_end else t + h
        n_acc += 1
        since_record += 1
        last_dt = h
        dts.append(h)
        uh, u_vals = new_h, new_vals
        done = t >= cfg.t_end
        exploded = stalled = False
        if cfg.nonlinearity_on:
            f0h = dst_forward(Field(domain, nl_new.f)).coeffs
            linf = float(np.max(np.abs(u_vals)))
            linfs.append(linf)
            exploded = linf > cfg.blowup_factor * linf0
            stalled = (
                h <= cfg.dt_min
                and len(linfs) > 10
                and all(b > a for a, b in zip(linfs[-11:-1], linfs[-10:]))
            )
        if since_record >= cfg.record_every or done or exploded or stalled:
            if u_vals is None:
                u_vals = dst_inverse(uh).values
            records.append(_record(t, uh, u_vals, nl_new.b, last_dt, diss, exps, consts))
            since_record = 0
            if cfg.stop_on_entry and (out := _entry_stop(records, u_vals, domain, n_acc, n_rej)):
                return out
        if exploded or stalled:
            return blowup(t + _tail_estimate(dts), records, u_vals, n_acc, n_rej)

        grow = 5.0 if err == 0 else min(5.0, max(0.1, cfg.safety * math.sqrt(cfg.tol_step / err)))
        dt = min(cfg.dt_max, max(cfg.dt_min, h * grow))

    if u_vals is None:
        u_vals = dst_inverse(uh).values
    out = RunOutcome(Verdict.HORIZON_REACHED, records, Field(domain, u_vals),
                     accepted_steps=n_acc, rejected_steps=n_rej)
    _annotate(out)
    return out


def _annotate(out: RunOutcome) -> None:
    for r in out.records:
        if out.entered_w is None and r.klass is WellClass.IN_W:
            out.entered_w = r.t
        if out.entered_v is None and r.klass is WellClass.IN_V:
            out.entered_v = r.t


def _entry_stop(records, u_vals, domain, n_acc=0, n_rej=0):
    k = records[-1].klass
    if k is WellClass.IN_W or k is WellClass.IN_V:
        v = Verdict.ENTERED_W if k is WellClass.IN_W else Verdict.ENTERED_V
        out = RunOutcome(v, records, Field(domain, u_vals.copy()), accepted_steps=n_acc, rejected_steps=n_rej)
        _annotate(out)
        return out
    return None


@dataclass
class PicardResult:
    u: Field
    iterations: int
    ratios: list = field(default_factory=list)
    changes: list = field(default_factory=list)


def picard_mild_solve(u0: Field, T: float, n_time: int, tol: float, max_iter: int,
                      kernel: RieszKernel, exps: Exponents, nonlinearity_on: bool = True) -> PicardResult:
    """Fixed-point iteration on the Duhamel formula with trapezoidal time quadrature.

    Each sweep evaluates ``u(t_i) = e^{t_i Delta} u0 + int_0^{t_i} e^{(t_i - s) Delta} f(u(s)) ds``
    on ``n_time + 1`` equispaced nodes from the previous iterate.  ``ratios``
    holds successive change ratios, which stay below one while the map
    contracts.
    """
    if T <= 0 or n_time < 1:
        raise ValueError("need T > 0 and n_time >= 1")
    domain = u0.domain
    dt = T / n_time
    E = np.exp(-domain.eigenvalues * dt)
    u0h = dst_forward(u0).coeffs
    # initial iterate: the free heat flow
    lin = [u0h]
    for _ in range(n_time):
        lin.append(E * lin[-1])
    current = [c.copy() for c in lin]
    if not nonlinearity_on:
        return PicardResult(dst_inverse(SpectralField(domain, current[-1])), 1)

    changes: list[float] = []
    ratios: list[float] = []
    for it in range(1, max_iter + 1):
        try:
            F = [dst_forward(Field(domain, _nonlinear(dst_inverse(SpectralField(domain, c)).values,
                                                      kernel, exps).f)).coeffs for c in current]
        except BlowUpSignal as exc:
            raise NonConvergence(f"Picard iterates overflowed at sweep {it} (T={T} too large?)", ratios) from exc
        new = [lin[0]]
        duhamel = np.zeros_like(u0h)
        for i in range(1, n_time + 1):
            duhamel = E * duhamel + 0.5 * dt * (E * F[i - 1] + F[i])
            new.append(lin[i] + duhamel)
        change = max(
            math.sqrt(float(np.sum((n - c) ** 2))) / max(math.sqrt(float(np.sum(n ** 2))), 1e-300)
            for n, c in zip(new, current)
        )
        if changes and changes[-1] > 0:
            ratios.append(change / changes[-1])
        changes.append(change)
        current = new
        if change < tol:
            return PicardResult(dst_inverse(SpectralField(domain, current[-1])), it, ratios, changes)
        if not math.isfinite(change):
            break
    raise NonConvergence(
        f"Picard iteration did not converge in {max_iter} sweeps (T={T} may be too large)", ratios
    )


def energy_identity_residual(outcome: RunOutcome) -> float:
    recs = outcome.records
    if len(recs) < 2:
        raise ValueError("need at least two records")
    j0 = recs[0].j
    scale = max(1.0, abs(j0))
    return max(abs(r.dissipation + r.j - j0) for r in recs) / scale


def nehari_derivative_check(outcome: RunOutcome) -> float:
    """Residual of ``d/dt (|u|_2^2 / 2) = -I(u)`` by a three-point stencil."""
    recs = outcome.records
    if len(recs) < 3:
        raise ValueError("need at least three records")
    t = np.array([r.t for r in recs])
    y = 0.5 * np.array([r.l2 for r in recs]) ** 2
    i = np.array([r.i for r in recs])
    worst = 0.0
    for n in range(1, len(recs) - 1):
        h0, h1 = t[n] - t[n - 1], t[n + 1] - t[n]
        if h0 <= 0 or h1 <= 0:
            continue
        dy = (-h1 / (h0 * (h0 + h1)) * y[n - 1] + (h1 - h0) / (h0 * h1) * y[n]
              + h0 / (h1 * (h0 + h1)) * y[n + 1])
        worst = max(worst, abs(dy + i[n]) / max(1.0, abs(i[n])))
    return worst


def scale_field(u: Field, lam: float, x0=(0.0, 0.0, 0.0), target_M: int | None = None) -> Field:
    """``v(y) = lam^(-1/2) u(x0 + y/lam)`` on the box of side ``lam * L``.

    ``u`` is extended by zero outside its box.  With ``x0 = 0`` and the same
    node count the grids correspond node for node and no interpolation is
    needed; otherwise values are interpolated trilinearly.
    """
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    M = target_M or u.domain.M
    dom = BoxDomain(lam * u.domain.L, M)
    x0 = np.asarray(x0, dtype=float)
    if M == u.domain.M and not np.any(x0):
        return Field(dom, lam ** -0.5 * u.values)
    from scipy.interpolate import RegularGridInterpolator

    L = u.domain.L
    axis = np.concatenate([[0.0], u.domain.nodes, [L]])
    padded = np.pad(u.values, 1)
    interp = RegularGridInterpolator((axis, axis, axis), padded, bounds_error=False, fill_value=0.0)
    Y = np.stack(dom.mesh(), axis=-1)
    return Field(dom, lam ** -0.5 * interp(x0 + Y / lam))


def closed_form_linear(u0: Field, times) -> tuple[np.ndarray, np.ndarray]:
    """``A(t)`` and ``|u(t)|_2`` of the free heat flow from ``u0``."""
    d = u0.domain
    c2 = dst_forward(u0).coeffs ** 2
    lam = d.eigenvalues
    a = np.array([d.mode_weight * np.sum(lam * c2 * np.exp(-2 * lam * t)) for t in times])
    l2 = np.array([math.sqrt(d.mode_weight * np.sum(c2 * np.exp(-2 * lam * t))) for t in times])
    return a, l2
