"""Command-line entry point tying analysis, synthesis, simulation, and
verification into seeded, reproducible runs.

Exit codes: 0 success (certify: all rows passed), 1 certify failure,
2 parse/config error, 3 infeasible, 4 numerical failure / relaxation limit.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis as ana
from . import cert as certmod
from . import synthesis as synth
from .errors import (
    DwellgainError,
    Infeasible,
    NoCertificate,
    NumericalFailure,
    ParseError,
    RelaxationLimit,
    StepTooLarge,
)
from .model import DwellTimeSpec, SwitchedSystem, load_system
from .sim import SequenceGen, estimate_gain, export_trajectory, generate_inputs, simulate

EXIT_OK = 0
EXIT_CERTIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


def _fmt(x: float) -> str:
    return repr(float(x))


def _relax_schedule(order_cap):
    if order_cap is None:
        return ana.RELAX_SCHEDULE
    return tuple(r for r in ana.RELAX_SCHEDULE if r <= order_cap) or (int(order_cap),)


def _analyze_once(sys_obj, dwell: DwellTimeSpec, degree: int, margin, order_cap, dump_lp=None):
    kw = {}
    if margin is not None:
        kw["margin"] = margin
    kw["relax_schedule"] = _relax_schedule(order_cap)
    if isinstance(sys_obj, SwitchedSystem):
        if dwell.kind != "minimum":
            raise ParseError("switched systems support --dwell minimum:<T>")
        return ana.analyze_switched_min(sys_obj, dwell.T, degree, dump_lp=dump_lp, **kw)
    if dwell.kind == "arbitrary":
        kw.pop("relax_schedule")
        cert = ana.analyze_arbitrary(sys_obj, **kw)
        return cert
    if dwell.kind == "constant":
        return ana.analyze_constant(sys_obj, dwell.T, degree, dump_lp=dump_lp, **kw)
    if dwell.kind == "minimum":
        return ana.analyze_minimum(sys_obj, dwell.T, degree, dump_lp=dump_lp, **kw)
    return ana.analyze_range(sys_obj, dwell.Tmin, dwell.Tmax, degree, dump_lp=dump_lp, **kw)


def _cmd_analyze(args) -> int:
    sys_obj = load_system(args.system)
    dwell = DwellTimeSpec.parse(args.dwell)
    cert = _analyze_once(sys_obj, dwell, args.degree, args.margin, args.order_cap, args.dump_lp)
    print(f"gamma = {_fmt(cert.gamma)}  ({cert.kind}, dwell {cert.dwell}, degree {cert.degree})")
    if args.output:
        cert.save(args.output)
        print(f"certificate written to {args.output}")
    return EXIT_OK


def _cmd_synthesize(args) -> int:
    sys_obj = load_system(args.system)
    dwell = DwellTimeSpec.parse(args.dwell)
    kw = {}
    if args.margin is not None:
        kw["margin"] = args.margin
    kw["relax_schedule"] = _relax_schedule(args.order_cap)
    if isinstance(sys_obj, SwitchedSystem):
        if dwell.kind != "minimum":
            raise ParseError("switched synthesis supports --dwell minimum:<T>")
        ctrl = synth.synthesize_switched(sys_obj, dwell.T, args.degree, dump_lp=args.dump_lp, **kw)
    else:
        ctrl = synth.synthesize(
            sys_obj, dwell, args.degree, fixed_kd=args.fixed_kd, dump_lp=args.dump_lp, **kw
        )
    print(f"gamma = {_fmt(ctrl.gamma)}  ({ctrl.kind}, dwell {ctrl.dwell})")
    if args.output:
        ctrl.save(args.output)
        print(f"controller written to {args.output}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    sys_obj = load_system(args.system)
    dwell = DwellTimeSpec.parse(args.dwell)
    gen = SequenceGen.for_spec(dwell, seed=args.seed)
    controller = synth.ControllerRealization.load(args.controller) if args.controller else None
    clamp = dwell.clamp
    traj = simulate(
        sys_obj,
        gen,
        generate_inputs("const_unit"),
        x0=np.zeros(sys_obj.n),
        horizon=args.horizon,
        step=args.step,
        controller=controller,
        clamp=clamp,
        check_step=True,
        rng=np.random.default_rng((args.seed, 0)),
    )
    gain = estimate_gain(
        sys_obj,
        gen,
        runs=args.runs,
        horizon=args.horizon,
        step=args.step,
        controller=controller,
        clamp=clamp,
        jobs=args.jobs,
    )
    prefix = args.output or "trajectory"
    export_trajectory(
        traj,
        prefix,
        sidecar={
            "command": "simulate",
            "system": args.system,
            "dwell": str(dwell),
            "seed": args.seed,
            "runs": args.runs,
            "inputs": "const_unit",
            "empirical_gain": gain,
            "controller": args.controller,
        },
    )
    print(f"empirical gain lower bound = {_fmt(gain)}  ({args.runs} runs, horizon {_fmt(args.horizon)})")
    print(f"trajectory written to {prefix}_states.csv / {prefix}_jumps.csv")
    return EXIT_OK


def _cmd_certify(args) -> int:
    sys_obj = load_system(args.system)
    with open(args.certificate) as fh:
        data = json.load(fh)
    if data.get("type") == "controller":
        ctrl = synth.ControllerRealization.from_json(data)
        cert = synth.certificate_from(ctrl)
        view = synth.closed_loop(sys_obj, ctrl)
        rep = certmod.verify(cert, view, grid=args.grid)
        print(rep.table())
        return EXIT_OK if rep.passed else EXIT_CERTIFY_FAILED
    cert = ana.Certificate.from_json(data)
    rep = certmod.verify(cert, sys_obj, grid=args.grid)
    print(rep.table())
    ok = rep.passed
    if ok:
        cc = certmod.cross_check_discrete(cert, sys_obj)
        print(f"state-transition cross-check residual: {_fmt(cc.phi_residual)} "
              f"({'ok' if cc.passed else 'VIOLATED'})")
        ok = ok and cc.passed
    if not ok:
        worst = min(rep.worst_slack, key=rep.worst_slack.get)
        print(f"FAILED: worst row family {worst!r} with slack {_fmt(rep.worst_slack[worst])}")
    return EXIT_OK if ok else EXIT_CERTIFY_FAILED


def _sweep_point(payload) -> tuple[float, float]:
    (path, kind, T, degree, margin, order_cap) = payload
    sys_obj = load_system(path)
    dwell = DwellTimeSpec.parse(f"{kind}:{T}")
    try:
        cert = _analyze_once(sys_obj, dwell, degree, margin, order_cap)
        return T, cert.gamma
    except (Infeasible, RelaxationLimit, NoCertificate):
        return T, float("nan")


def _cmd_sweep(args) -> int:
    kind = args.dwell.split(":")[0]
    if kind not in ("minimum", "constant"):
        raise ParseError("sweep supports --dwell minimum or constant")
    Ts = np.linspace(args.sweep_from, args.sweep_to, args.points)
    payloads = [(args.system, kind, float(T), args.degree, args.margin, args.order_cap) for T in Ts]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]
    out = args.output or "sweep.csv"
    lines = ["T,gamma"]
    for T, g in results:
        lines.append(f"{_fmt(T)},{_fmt(g)}")
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"sweep written to {out} ({args.points} points)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dwellgain",
        description="Dwell-time stability and hybrid-gain analysis/synthesis for positive impulsive and switched systems",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, dwell=True):
        p.add_argument("--system", required=True, help="system JSON file")
        if dwell:
            p.add_argument("--dwell", required=True,
                           help="arbitrary | constant:<T> | minimum:<T> | range:<Tmin>:<Tmax>")
        p.add_argument("--degree", type=int, default=4, help="certificate polynomial degree")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--margin", type=float, default=None, help="strictness margin override")
        p.add_argument("--order-cap", type=int, default=None, help="interval-certificate order cap")
        p.add_argument("--dump-lp", default=None, help="write the solved LP in LP format")

    p = sub.add_parser("analyze", help="certified gain bound; writes certificate JSON")
    common(p)
    p.add_argument("--output", "-o", default=None, help="certificate JSON path")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("synthesize", help="state-feedback design; writes controller JSON")
    common(p)
    p.add_argument("--fixed-kd", action="store_true", help="dwell-time-independent discrete gain (range)")
    p.add_argument("--output", "-o", default=None, help="controller JSON path")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("simulate", help="Monte-Carlo gain lower bound + trajectory CSVs")
    common(p)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--horizon", type=float, default=30.0)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--controller", default=None, help="apply a synthesized controller JSON")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for the Monte-Carlo runs")
    p.add_argument("--output", "-o", default=None, help="output prefix (default 'trajectory')")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("certify", help="independent verification of a certificate/controller")
    p.add_argument("--system", required=True)
    p.add_argument("--certificate", required=True, help="certificate or controller JSON")
    p.add_argument("--grid", type=int, default=1000)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("sweep", help="gamma over a dwell-time grid, written as CSV")
    p.add_argument("--system", required=True)
    p.add_argument("--dwell", required=True, help="minimum | constant")
    p.add_argument("--from", dest="sweep_from", type=float, required=True)
    p.add_argument("--to", dest="sweep_to", type=float, required=True)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--margin", type=float, default=None)
    p.add_argument("--order-cap", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=_cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalFailure, RelaxationLimit, NoCertificate, StepTooLarge) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DwellgainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
