"""Command line front end.

Subcommands: gen (write an instance file), audit (run checks and persist a
report), curves (export Monte Carlo curves), rd (trace the rate-distortion
frontier), functionals (chaining quantities for one instance).

Exit codes: 0 when no enabled check failed, 2 when any check failed,
1 on usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ._version import __version__
from .audit import (
    ALL_CHECKS,
    default_lambdas,
    export_curves,
    run_audit,
    write_report,
)
from .errors import MmtLabError
from .functionals import MeasureOnT, ft_optimize, ft_value, gamma2_part_exact
from .instances import FAMILIES, generate_instance, load_instance, save_instance
from .process_core import metric_of, uniform_prior
from .rate_distortion import pareto_trace
from .width import width_mc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _checks(text: str) -> list:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    bad = [p for p in parts if p not in ALL_CHECKS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown checks: {', '.join(bad)}")
    return parts


def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=_seed, default=0, help="master seed (u64)")
    sub.add_argument("--samples", type=int, default=200000,
                     help="Monte Carlo samples per estimate")
    sub.add_argument("--out", default=None, help="output file or directory")
    sub.add_argument("--tol", type=float, default=1e-10,
                     help="coupling marginal-residual tolerance")
    sub.add_argument("--checks", type=_checks, default=None,
                     help="comma-separated subset, e.g. A1,A3,A10")
    sub.add_argument("--format", choices=("json", "csv"), default="json",
                     help="output format where applicable")


def build_parser() -> _Parser:
    p = _Parser(prog="mmtlab", description=__doc__.split("\n")[0] if __doc__ else "")
    p.add_argument("--version", action="version", version=f"mmtlab {__version__}")
    subs = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = subs.add_parser("gen", help="generate an instance file")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--size", type=int, required=True)
    g.add_argument("--dim", type=int, default=None)
    _common(g)
    g.set_defaults(func=cmd_gen)

    a = subs.add_parser("audit", help="run the check suite on an instance")
    a.add_argument("--instance", required=True, help="instance JSON path")
    _common(a)
    a.set_defaults(func=cmd_audit)

    c = subs.add_parser("curves", help="export Monte Carlo curves as CSV")
    c.add_argument("--instance", required=True)
    c.add_argument("--grid-points", type=int, default=64)
    _common(c)
    c.set_defaults(func=cmd_curves)

    r = subs.add_parser("rd", help="trace the rate-distortion frontier")
    r.add_argument("--instance", required=True)
    _common(r)
    r.set_defaults(func=cmd_rd)

    f = subs.add_parser("functionals", help="chaining quantities for an instance")
    f.add_argument("--instance", required=True)
    _common(f)
    f.set_defaults(func=cmd_functionals)
    return p


def cmd_gen(args) -> int:
    inst = generate_instance(args.family, args.size, dim=args.dim, seed=args.seed)
    path = args.out or f"{inst.name}.json"
    save_instance(inst, path)
    print(path)
    return 0


def cmd_audit(args) -> int:
    inst = load_instance(args.instance)
    report = run_audit(inst, checks=args.checks, samples=args.samples,
                       seed=args.seed, tol=args.tol)
    path = write_report(report, args.out or "reports")
    for rec in report.records:
        print(f"{rec.check_id} {rec.status} lhs={rec.lhs:.9g} rhs={rec.rhs:.9g} "
              f"tol={rec.tolerance:.3g}")
    print(path)
    return 2 if report.failed() else 0


def cmd_curves(args) -> int:
    inst = load_instance(args.instance)
    cpath, rpath = export_curves(inst, args.out or "curves_out",
                                 samples=args.samples, seed=args.seed,
                                 grid_points=args.grid_points)
    print(cpath)
    print(rpath)
    return 0


def cmd_rd(args) -> int:
    inst = load_instance(args.instance)
    from .instances import instance_prior, instance_process

    metric = metric_of(instance_process(inst))
    trace = pareto_trace(metric, instance_prior(inst), default_lambdas(metric))
    if args.format == "csv":
        lines = ["lambda,rate,distortion_sq"]
        lines += [f"{lam!r},{rate!r},{dsq!r}" for lam, rate, dsq in trace.points]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps({
            "entropy_cap": trace.entropy_cap,
            "points": [[lam if np.isfinite(lam) else 1e308, rate, dsq]
                       for lam, rate, dsq in trace.points],
        }, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def cmd_functionals(args) -> int:
    inst = load_instance(args.instance)
    from .instances import instance_process

    emb = instance_process(inst)
    metric = metric_of(emb)
    n = emb.n
    uni = MeasureOnT(weights=uniform_prior(n).weights)
    mu, m_hat = ft_optimize(metric, budget=200, seed=args.seed)
    out = {
        "n": n,
        "diam": metric.diam,
        "ft_uniform": ft_value(metric, uni),
        "ft_optimized": m_hat,
        "ft_weights": [float(x) for x in mu.weights],
        "width_mc": width_mc(emb, args.samples, args.seed).value,
    }
    if n <= 8:
        out["gamma2_cap1"] = gamma2_part_exact(metric, 1)
        out["gamma2_cap2"] = gamma2_part_exact(metric, 2)
    if args.format == "csv":
        keys = [k for k in sorted(out) if not isinstance(out[k], list)]
        text = ",".join(keys) + "\n" + ",".join(repr(float(out[k])) if isinstance(out[k], float)
                                                else str(out[k]) for k in keys) + "\n"
    else:
        text = json.dumps(out, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except MmtLabError as exc:
        sys.stderr.write(f"mmtlab: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"mmtlab: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
