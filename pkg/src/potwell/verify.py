"""Deterministic invariant suite behind ``potwell verify``.

Every check runs on small grids with a seeded generator and reports a
pass/fail line with its measured value; no timings are printed, so two runs
with the same seed produce identical text.
"""
from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import io as pio
from .classifier import Kind, classify_trajectory
from .evolution import SolverConfig, closed_form_linear, integrate, picard_mild_solve
from .functionals import Exponents, WellClass, compute_B, constants_build, hls_check
from .grid import BoxDomain, Field, sine_mode
from .ground_state import minimize_quotient, quotient
from .riesz import kernel_build


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    value: float
    limit: float

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name:<32s} value={self.value:.6e} limit={self.limit:.3e}"


def _direct_B(u: np.ndarray, h: float, mu: float, p: float, self_weight: float) -> float:
    """O(M^6) double sum with the same self-cell weight as the kernel."""
    M = u.shape[0]
    idx = np.indices(u.shape).reshape(3, -1).T * h
    g = np.abs(u.ravel()) ** p
    d = np.linalg.norm(idx[:, None, :] - idx[None, :, :], axis=-1)
    np.fill_diagonal(d, 1.0)
    K = d ** -mu
    np.fill_diagonal(K, self_weight / h ** 3)
    return float(h ** 6 * g @ K @ g)


def run_checks(seed: int = 7) -> list[Check]:
    rng = np.random.default_rng(seed)
    mu = 2.0
    exps, consts = Exponents(mu), constants_build(mu)
    out: list[Check] = []

    def add(name, value, limit, ok=None):
        out.append(Check(name, bool(value <= limit) if ok is None else bool(ok), float(value), float(limit)))

    # constants
    add("constants.s_hl_identity", abs(consts.s_hl / (consts.s_sob / consts.c_hls ** 0.25) - 1), 1e-12)
    add("constants.m_mu_identity", abs(consts.m_mu / (0.375 * consts.s_hl ** (4 / 3)) - 1), 1e-12)

    # convolution against the direct double sum
    d6 = BoxDomain(1.0, 6)
    k6 = kernel_build(d6, mu)
    worst = 0.0
    for _ in range(5):
        u = Field(d6, rng.standard_normal((6, 6, 6)))
        ref = _direct_B(u.values, d6.h, mu, exps.p, k6.self_cell_weight)
        worst = max(worst, abs(compute_B(u, k6, exps) - ref) / ref)
    add("riesz.direct_sum", worst, 1e-10)

    d = BoxDomain(1.0, 16)
    k = kernel_build(d, mu)
    phi = sine_mode(d)

    # HLS bound and quotient homogeneity on random fields
    worst_hls, worst_q = -np.inf, 0.0
    for _ in range(4):
        u = Field(d, rng.standard_normal((16, 16, 16)))
        r = hls_check(u, k, exps, consts)
        worst_hls = max(worst_hls, r.lhs / r.rhs)
        q = quotient(u, k, exps)
        worst_q = max(worst_q, abs(quotient(3.0 * u, k, exps) / q - 1))
    add("functionals.hls_ratio", worst_hls, 1.0)
    add("ground_state.scale_invariance", worst_q, 1e-10)

    # linear flow against the closed form
    lin = integrate(phi + 0.3 * sine_mode(d, (2, 1, 3)), SolverConfig(t_end=0.05, nonlinearity_on=False),
                    k, exps, consts)
    a_ref, l2_ref = closed_form_linear(phi + 0.3 * sine_mode(d, (2, 1, 3)), lin.column("t"))
    err = max(np.max(np.abs(lin.column("a") / a_ref - 1)), np.max(np.abs(lin.column("l2") / l2_ref - 1)))
    add("evolution.linear_exactness", err, 1e-8)

    # nonlinear decay: Lyapunov monotonicity and well invariance
    cfg = SolverConfig(t_end=0.05, tol_step=1e-4)
    w = integrate(1.2 * phi, cfg, k, exps, consts)
    j = w.column("j")
    add("evolution.lyapunov", float(np.max(np.diff(j), initial=0.0)), 10 * cfg.tol_step)
    kinds = [r.klass for r in w.records]
    flips = sum(1 for a, b in zip(kinds, kinds[1:]) if {a, b} == {WellClass.IN_W, WellClass.IN_V})
    add("evolution.well_invariance", flips, 0)

    # fast blow-up
    v = classify_trajectory(50 * phi, SolverConfig(t_end=0.05, tol_step=1e-3, blowup_factor=1e2), k, exps, consts)
    add("classifier.blowup_consistent", 0.0 if v.kind is Kind.ENTERS_V and v.consistent else 1.0, 0.0)

    # mild solution against the stepper
    T = 0.005
    pic = picard_mild_solve(1.5 * phi, T, 40, 1e-12, 60, k, exps)
    ref = integrate(1.5 * phi, SolverConfig(t_end=T, tol_step=1e-7), k, exps, consts).final
    rel = float(np.linalg.norm(pic.u.values - ref.values) / np.linalg.norm(ref.values))
    add("evolution.picard_agreement", rel, 1e-4)
    add("evolution.picard_contraction", max(pic.ratios, default=0.0), 1.0, ok=max(pic.ratios, default=0.0) < 1)

    # quotient descent
    res = minimize_quotient(phi, 40, 1e-9, k, exps, consts)
    dec = all(b < a for a, b in zip(res.q_log, res.q_log[1:]))
    add("ground_state.monotone_log", 0.0 if dec else 1.0, 0.0)
    add("ground_state.m_est_identity", abs(res.m_est / (0.375 * res.q_min ** (4 / 3)) - 1), 1e-12)

    # persistence
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "u.chk"
        u = Field(d, rng.standard_normal((16, 16, 16)))
        pio.write_checkpoint(u, 0.125, mu, path)
        back, t, m = pio.read_checkpoint(path)
        same = np.array_equal(back.values.view(np.uint64), u.values.view(np.uint64)) and t == 0.125 and m == mu
        add("io.checkpoint_roundtrip", 0.0 if same else 1.0, 0.0)
        csv = Path(tmp) / "ts.csv"
        pio.write_timeseries(w.records, csv)
        add("io.csv_roundtrip", 0.0 if pio.records_close(pio.read_timeseries(csv), w.records) else 1.0, 0.0)
    text = pio.dump_config(pio.RunConfig())
    add("io.config_roundtrip", 0.0 if pio.dump_config(pio.parse_config(text)) == text else 1.0, 0.0)
    return out


def report(seed: int = 7) -> tuple[str, bool]:
    checks = run_checks(seed)
    lines = [f"potwell verify seed={seed}"] + [c.line() for c in checks]
    ok = all(c.ok for c in checks)
    lines.append(f"{sum(c.ok for c in checks)}/{len(checks)} checks passed")
    return "\n".join(lines) + "\n", ok
