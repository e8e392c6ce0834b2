"""Command-line entry point (``potwell``)."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as pio
from .classifier import BracketInvalid, classify_trajectory, lambda_scan
from .evolution import NonConvergence, integrate, picard_mild_solve
from .functionals import Exponents, constants_build
from .grid import norm
from .ground_state import minimize_quotient
from .riesz import kernel_build

log = logging.getLogger("potwell")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="potwell", description="Critical Choquard heat flow on a box.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", type=Path, help="key = value file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
        return p

    with_config(sub.add_parser("simulate", help="integrate one trajectory"))
    with_config(sub.add_parser("scan-lambda", help="bracket the amplitude thresholds"))
    with_config(sub.add_parser("ground-state", help="minimise the HLS-Sobolev quotient"))
    with_config(sub.add_parser("picard-compare", help="mild solution vs. time stepper"))
    p = sub.add_parser("constants", help="print the constants table")
    p.add_argument("--mu", type=float, default=2.0)
    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--output", type=Path, help="also write the report here")
    return ap


def _load(args) -> pio.RunConfig:
    cfg = pio.load_config(args.config) if args.config else pio.RunConfig()
    return pio.apply_overrides(cfg, args.overrides)


def _setup(cfg: pio.RunConfig):
    domain = cfg.domain
    exps, consts = Exponents(cfg.mu), constants_build(cfg.mu)
    return domain, kernel_build(domain, cfg.mu), exps, consts


def _outdir(cfg) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.cfg").write_text(pio.dump_config(cfg))
    return out


def cmd_simulate(cfg) -> int:
    domain, kernel, exps, consts = _setup(cfg)
    u0 = cfg.initial.build(domain)
    v = classify_trajectory(u0, cfg.solver, kernel, exps, consts)
    out = _outdir(cfg)
    pio.write_timeseries(v.outcome.records, out / "timeseries.csv")
    pio.write_checkpoint(v.outcome.final, v.outcome.t_end, cfg.mu, out / "final.chk")
    o = v.outcome
    print(f"verdict      {o.verdict.value}")
    print(f"kind         {v.kind.value}" + (f" t0={v.t0:.6g}" if v.t0 is not None else ""))
    print(f"t_end        {o.t_end:.6g}")
    if o.t_blowup is not None:
        print(f"t_blowup     {o.t_blowup:.6g}")
    print(f"steps        {o.accepted_steps} accepted, {o.rejected_steps} rejected")
    print(f"output       {out}")
    return 0


def cmd_scan(cfg) -> int:
    domain, kernel, exps, consts = _setup(cfg)
    phi = cfg.initial.build(domain)
    phi = phi / norm(phi, float("inf"))
    try:
        res = lambda_scan(phi, cfg.lambda_min, cfg.lambda_max, cfg.bracket_tol, cfg.solver, kernel, exps, consts)
    except BracketInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = _outdir(cfg)
    with open(out / "probes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "kind", "t0", "verdict"])
        for lam, v in res.probes:
            w.writerow([f"{lam:.17g}", v.kind.value, "" if v.t0 is None else f"{v.t0:.17g}", v.outcome.verdict.value])
    print(f"lambda1 in ({res.lambda1_lo:.6g}, {res.lambda1_hi:.6g})")
    print(f"lambda2 in ({res.lambda2_lo:.6g}, {res.lambda2_hi:.6g})")
    print(f"probes {len(res.probes)}, ordered={res.ordered}, exhausted={res.exhausted}")
    return 0


def cmd_ground_state(cfg) -> int:
    domain, kernel, exps, consts = _setup(cfg)
    u0 = cfg.initial.build(domain)
    res = minimize_quotient(u0, cfg.gs_max_iter, cfg.gs_tol, kernel, exps, consts)
    out = _outdir(cfg)
    pio.write_checkpoint(res.minimizer, 0.0, cfg.mu, out / "minimizer.chk")
    print(f"q_min        {res.q_min:.10g}  (s_hl {consts.s_hl:.10g}, ratio {res.q_min / consts.s_hl:.6f})")
    print(f"m_est        {res.m_est:.10g}  (m_mu {consts.m_mu:.10g})")
    print(f"iterations   {res.iterations}{' (stalled)' if res.stalled else ''}")
    return 0


def cmd_picard(cfg) -> int:
    domain, kernel, exps, consts = _setup(cfg)
    u0 = cfg.initial.build(domain)
    try:
        pic = picard_mild_solve(u0, cfg.picard_T, cfg.picard_n_time, cfg.picard_tol, cfg.picard_max_iter,
                                kernel, exps, cfg.solver.nonlinearity_on)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ref = integrate(u0, cfg.solver.with_(t_end=cfg.picard_T), kernel, exps, consts).final
    rel = float(np.linalg.norm(pic.u.values - ref.values) / np.linalg.norm(ref.values))
    print(f"T            {cfg.picard_T:.6g}")
    print(f"iterations   {pic.iterations}")
    print(f"max ratio    {max(pic.ratios, default=0.0):.6g}")
    print(f"rel L2 diff  {rel:.6e}")
    return 0


def cmd_constants(mu: float) -> int:
    c = constants_build(mu)
    print(f"mu     {c.mu:.17g}")
    print(f"p      {Exponents(mu).p:.17g}")
    print(f"c_hls  {c.c_hls:.17g}")
    print(f"s_sob  {c.s_sob:.17g}")
    print(f"s_hl   {c.s_hl:.17g}")
    print(f"m_mu   {c.m_mu:.17g}")
    return 0


def cmd_verify(seed: int, output) -> int:
    from .verify import report

    text, ok = report(seed)
    sys.stdout.write(text)
    if output:
        Path(output).write_text(text)
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.command == "constants":
            return cmd_constants(args.mu)
        if args.command == "verify":
            return cmd_verify(args.seed, args.output)
        cfg = _load(args)
        return {
            "simulate": cmd_simulate,
            "scan-lambda": cmd_scan,
            "ground-state": cmd_ground_state,
            "picard-compare": cmd_picard,
        }[args.command](cfg)
    except (pio.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # bad --mu and similar argument errors
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
