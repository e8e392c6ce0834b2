"""Trajectory classification by potential-well entry and threshold scans.

For ``u0 = lam * phi`` with ``phi >= 0`` the set of amplitudes whose orbit
enters the stable set is an interval ``(0, lam1)`` and the set entering the
unstable set is ``(lam2, inf)``; orbits for ``lam`` in between meet neither.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .evolution import RunOutcome, SolverConfig, Verdict, integrate
from .functionals import Constants, Exponents, WellClass, c0_estimate, is_zero
from .grid import Field
from .riesz import RieszKernel

log = logging.getLogger(__name__)


class BracketInvalid(ValueError):
    pass


class Kind(enum.Enum):
    ENTERS_W = "EntersW"
    ENTERS_V = "EntersV"
    UNDETERMINED = "Undetermined"


@dataclass
class TrajectoryVerdict:
    kind: Kind
    outcome: RunOutcome
    t0: float | None = None
    c_limit: float | None = None
    c0: float | None = None
    consistent: bool = True


def _first_entry(records, zero_start: bool):
    for r in records:
        if r.klass is WellClass.IN_W or (zero_start and r.klass is WellClass.ZERO):
            return Kind.ENTERS_W, r.t
        if r.klass is WellClass.IN_V:
            return Kind.ENTERS_V, r.t
    return Kind.UNDETERMINED, None


def _dt_collapsed(outcome: RunOutcome) -> bool:
    dts = [r.dt for r in outcome.records if r.dt > 0]
    return len(dts) > 3 and dts[-1] < 1e-6 * max(dts)


def verdict_from_outcome(outcome: RunOutcome, exps: Exponents, zero_start: bool = False) -> TrajectoryVerdict:
    kind, t0 = _first_entry(outcome.records, zero_start)
    v = TrajectoryVerdict(kind, outcome, t0)
    if kind is Kind.ENTERS_V:
        v.consistent = outcome.verdict is Verdict.BLOW_UP or (
            outcome.verdict is Verdict.HORIZON_REACHED and _dt_collapsed(outcome)
        )
    elif outcome.records and outcome.verdict is not Verdict.BLOW_UP:
        est = c0_estimate([r.j for r in outcome.records], exps)
        v.c_limit = outcome.records[-1].j
        if not est.provisional:
            v.c0 = est.value
    return v


def classify_trajectory(u0: Field, cfg: SolverConfig, kernel: RieszKernel, exps: Exponents,
                        consts: Constants) -> TrajectoryVerdict:
    outcome = integrate(u0, cfg, kernel, exps, consts)
    v = verdict_from_outcome(outcome, exps, zero_start=is_zero(u0))
    if not v.consistent:
        log.warning("trajectory entered V without a blow-up signature")
    return v


@dataclass
class LambdaScanResult:
    lambda1_lo: float
    lambda1_hi: float
    lambda2_lo: float
    lambda2_hi: float
    probes: list = field(default_factory=list)
    exhausted: bool = False
    violations: list = field(default_factory=list)

    @property
    def ordered(self) -> bool:
        return not self.violations


def ordering_violations(probes) -> list:
    """Pairs ``(lam_a, lam_b)`` with ``lam_a < lam_b`` whose verdicts break monotonicity."""
    rank = {Kind.ENTERS_W: 0, Kind.UNDETERMINED: 1, Kind.ENTERS_V: 2}
    ps = sorted(probes, key=lambda p: p[0])
    bad = []
    for i, (la, va) in enumerate(ps):
        for lb, vb in ps[i + 1:]:
            if rank[va.kind] > rank[vb.kind]:
                bad.append((la, lb))
    return bad


def lambda_scan(phi: Field, lambda_min: float, lambda_max: float, bracket_tol: float,
                cfg: SolverConfig, kernel: RieszKernel, exps: Exponents, consts: Constants,
                max_probes: int = 40) -> LambdaScanResult:
    """Bracket the two amplitude thresholds by geometric bisection.

    The first bisection moves on "orbit enters W", the second on "orbit
    enters V"; probes are shared, so when no probe is undetermined the two
    brackets coincide.
    """
    if np.any(phi.values < 0) or is_zero(phi):
        raise ValueError("phi must be nonnegative and nonzero")
    if not 0 < lambda_min < lambda_max:
        raise ValueError("need 0 < lambda_min < lambda_max")
    if not bracket_tol > 0:
        raise ValueError("bracket_tol must be positive")

    cache: dict[float, TrajectoryVerdict] = {}

    def probe(lam: float) -> TrajectoryVerdict:
        if lam not in cache:
            cache[lam] = classify_trajectory(lam * phi, cfg, kernel, exps, consts)
            log.info("probe lambda=%.6g -> %s", lam, cache[lam].kind.value)
        return cache[lam]

    lo_v, hi_v = probe(lambda_min), probe(lambda_max)
    if lo_v.kind is not Kind.ENTERS_W or hi_v.kind is not Kind.ENTERS_V:
        raise BracketInvalid(
            f"need EntersW at {lambda_min} and EntersV at {lambda_max}, "
            f"got {lo_v.kind.value} and {hi_v.kind.value}"
        )

    def bisect(pred) -> tuple[float, float, bool]:
        lo, hi = lambda_min, lambda_max
        while hi / lo > 1 + bracket_tol:
            if len(cache) >= max_probes:
                return lo, hi, True
            mid = math.sqrt(lo * hi)
            if pred(probe(mid)):
                lo = mid
            else:
                hi = mid
        return lo, hi, False

    l1_lo, l1_hi, ex1 = bisect(lambda v: v.kind is Kind.ENTERS_W)
    l2_lo, l2_hi, ex2 = bisect(lambda v: v.kind is not Kind.ENTERS_V)
    probes = sorted(cache.items())
    return LambdaScanResult(l1_lo, l1_hi, l2_lo, l2_hi, probes, ex1 or ex2, ordering_violations(probes))


@dataclass(frozen=True)
class InfiniteBlowupReport:
    j_floor_ok: bool
    linf_growth_ok: bool
    c0_positive: bool
    c0: float


def infinite_blowup_probe(verdict: TrajectoryVerdict, consts: Constants, exps: Exponents,
                          tol: float = 1e-3) -> InfiniteBlowupReport:
    """Necessary-condition checks for blow-up in infinite time.

    Reports whether ``J`` stays above the well depth, whether ``|u|_inf`` ends
    above its start with an increasing trend, and whether the limiting energy
    constant is positive.  No verdict is claimed.
    """
    if verdict.kind is not Kind.UNDETERMINED:
        raise ValueError(f"probe needs an undetermined trajectory, got {verdict.kind.value}")
    recs = verdict.outcome.records
    if len(recs) < 2:
        raise ValueError("need at least two records")
    j = np.array([r.j for r in recs])
    t = np.array([r.t for r in recs])
    linf = np.array([r.linf for r in recs])
    j_floor_ok = bool(np.all(j >= consts.m_mu - tol * max(1.0, consts.m_mu)))
    half = len(recs) // 2
    tail_t, tail_l = t[half:], linf[half:]
    slope = float(np.polyfit(tail_t, tail_l, 1)[0]) if len(tail_t) > 1 and np.ptp(tail_t) > 0 else 0.0
    linf_growth_ok = bool(linf[-1] > linf[0] and slope > 0)
    c0 = exps.c0_factor * float(j[-1])
    return InfiniteBlowupReport(j_floor_ok, linf_growth_ok, c0 > 0, c0)
