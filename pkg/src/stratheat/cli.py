"""Command line front end.

Exit codes: 0 all checks pass, 1 at least one check failed, 2 configuration
or group-spec error, 3 runtime/numeric error.
"""

from __future__ import annotations

import argparse
import sys

from .algebra import StructuralError
from .estimators import PoisonedEstimateError
from .kernel import QuadratureError
from .experiments import (
    ExperimentConfig,
    run_contractivity,
    run_identities,
    run_kernel_check,
    run_lsi_probe,
    run_nonholo,
    run_sample,
    run_shc,
    run_validate,
)

_RUNNERS = {
    "validate": run_validate,
    "sample": run_sample,
    "identities": run_identities,
    "contractivity": run_contractivity,
    "shc": run_shc,
    "lsi-probe": run_lsi_probe,
    "kernel-check": run_kernel_check,
    "nonholo": run_nonholo,
}


def _parse_t_grid(text: str) -> tuple[float, ...]:
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise StructuralError(f"bad t-grid {text!r}, expected a:b:step") from exc
    if step <= 0 or hi < lo:
        raise StructuralError(f"bad t-grid {text!r}")
    out = []
    t = lo
    while t <= hi + 1e-12:
        out.append(round(t, 12))
        t += step
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stratheat",
        description="Verification experiments for dilation semigroups and "
        "heat-kernel inequalities on stratified complex groups.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--group", default="heisenberg:1",
                       help="builtin tag (heisenberg:n, abelian:n, filiform:m) or JSON path")
        p.add_argument("--a", type=float, default=1.0, help="heat-kernel time parameter")
        p.add_argument("--n", type=int, default=1_000_000, help="Monte Carlo sample count")
        p.add_argument("--steps", type=int, default=256, help="time discretisation steps")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="report JSON path (CSV mirror beside it)")
        p.add_argument("--tol", type=float, default=None, help="kernel quadrature tolerance")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--family-size", type=int, default=20)
        p.add_argument("--degree", type=int, default=3)
        if name == "validate":
            p.add_argument("--ip", default=None,
                           help="'euclidean' or path to a 2N x 2N Gram matrix JSON")
        if name in ("contractivity", "shc"):
            p.add_argument("--f", dest="f_text", default=None,
                           help="polynomial, e.g. 'z1^2 + (0,1)*z3'")
            p.add_argument("--t-grid", default="0:2:0.25")
        if name == "shc":
            p.add_argument("--q", type=float, default=2.0)
            p.add_argument("--p", type=float, default=4.0)
            p.add_argument("--c", type=float, default=None)
            p.add_argument("--c-from-probe", action="store_true")
            p.add_argument("--beta", type=float, default=0.0)
        if name == "contractivity":
            p.add_argument("--p", type=float, default=2.0)
        if name == "kernel-check":
            p.add_argument("--bandwidth", type=float, default=0.05)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    fields = {
        "experiment": args.command,
        "group": args.group,
        "a": args.a,
        "n": args.n,
        "steps": args.steps,
        "seed": args.seed,
        "tol": args.tol,
        "out": args.out,
        "workers": args.workers,
        "family_size": args.family_size,
        "degree": args.degree,
    }
    for name in ("p", "q", "c", "beta", "f_text", "ip", "bandwidth"):
        if hasattr(args, name):
            value = getattr(args, name)
            if value is not None or name in ("c", "f_text", "ip"):
                fields[name] = value
    if hasattr(args, "c_from_probe"):
        fields["c_from_probe"] = args.c_from_probe
    if hasattr(args, "t_grid"):
        fields["t_grid"] = _parse_t_grid(args.t_grid)
    return ExperimentConfig(**fields)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = config_from_args(args)
        report = _RUNNERS[args.command](cfg)
    except StructuralError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, PoisonedEstimateError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 3

    for check in report.checks:
        status = "pass" if check.passed else "FAIL"
        print(f"[{status}] {check.name}: estimate={check.estimate:.6g} "
              f"stderr={check.stderr:.3g} threshold={check.threshold:.6g}")
    print(f"verdict: {report.verdict} ({report.walltime_s:.1f}s)")
    return 0 if report.verdict == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
