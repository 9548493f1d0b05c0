"""Command-line entry point: ``qtrunc {bound,propagate,optimize,verify,report}``."""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import FieldBudget, full_report
from .errors import CertificateViolation, DimensionMismatch, NonConvergence, SchemaError
from .optimize import OptimizerConfig, default_initial_field, optimize_monotonic
from .propagate import (
    basis_state,
    final_distance,
    leakage_profile,
    load_field,
    propagate,
    save_field,
    write_leakage_csv,
    write_trajectory_csv,
)
from .system import resolve_system
from .verify import DEFAULT_SUITE, run_suite

EXIT_BAD_ARGS = 2
EXIT_CERTIFICATE = 3
EXIT_OVERFLOW = 4
EXIT_FIELD_FILE = 5
EXIT_DIMENSION = 6
EXIT_MONOTONICITY = 7


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True)


def write_manifest(prefix: str, subcommand: str, args: argparse.Namespace, inputs: list, outputs: list) -> Path:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = Path(f"{prefix}.manifest.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dump(manifest) + "\n")
    return path


def _system(args):
    try:
        return resolve_system(args.system)
    except CertificateViolation as exc:
        print(f"error: certificate violation: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CERTIFICATE)
    except (SchemaError, OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot load system {args.system!r}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_BAD_ARGS)


def _default_level(system, level):
    return max(1, system.first_index) if level is None else level


def cmd_bound(args) -> int:
    system = _system(args)
    psi0 = _default_level(system, args.psi0)
    if args.eps <= 0 or args.K < 0:
        print("error: need --eps > 0 and --K >= 0", file=sys.stderr)
        return EXIT_BAD_ARGS
    outputs = []
    if args.out_prefix:
        outputs = [Path(f"{args.out_prefix}.report.json")]
        write_manifest(args.out_prefix, "bound", args, [], outputs)
    report = full_report(system, FieldBudget(args.K), psi0, args.eps)
    text = _dump(report.to_dict())
    print(text)
    for path in outputs:
        path.write_text(text + "\n")
    return EXIT_OVERFLOW if report.overflow else 0


def _levels_needed(profile: np.ndarray, threshold: float) -> int:
    """Smallest ``N`` such that every level beyond the first ``N`` stays below ``threshold``."""
    above = np.nonzero(profile >= threshold)[0]
    return int(above[-1]) + 1 if len(above) else 0


def cmd_propagate(args) -> int:
    system = _system(args)
    try:
        field = load_field(args.field)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read field file {args.field}: {exc}", file=sys.stderr)
        return EXIT_FIELD_FILE
    prefix = args.out_prefix
    outputs = [Path(f"{prefix}.{s}") for s in ("traj.csv", "leakage.csv", "summary.json")]
    write_manifest(prefix, "propagate", args, [args.field], outputs)
    psi0_level = _default_level(system, args.psi0)
    try:
        psi0 = basis_state(system, args.N, psi0_level)
        target = basis_state(system, args.N, args.target) if args.target is not None else None
        traj = propagate(system, args.N, field, psi0, record_stride=args.stride)
    except (DimensionMismatch, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION

    write_trajectory_csv(outputs[0], traj)
    write_leakage_csv(outputs[1], traj)
    profile = leakage_profile(traj)
    summary = {
        "system": system.name,
        "N": args.N,
        "psi0": psi0_level,
        "K": field.K,
        "T": field.T,
        "dt": field.dt,
        "steps": field.steps,
        "max_h0_expect": float(traj.h0_expect.max()),
        "max_norm_deviation": float(np.max(np.abs(traj.norms - 1))),
        "leak_threshold": args.leak_threshold,
        "levels_needed": _levels_needed(profile, args.leak_threshold),
    }
    if target is not None:
        summary["target"] = args.target
        summary["final_distance"] = final_distance(traj, target)
        summary["final_distance_squared"] = final_distance(traj, target, squared=True)
    outputs[2].write_text(_dump(summary) + "\n")
    print(_dump(summary))
    return 0


def cmd_optimize(args) -> int:
    system = _system(args)
    prefix = args.out_prefix
    outputs = [Path(f"{prefix}.field.csv"), Path(f"{prefix}.summary.json")]
    write_manifest(prefix, "optimize", args, [], outputs)
    psi0_level = _default_level(system, args.psi0)
    try:
        psi0 = basis_state(system, args.N, psi0_level)
        psif = basis_state(system, args.N, args.psif)
    except (DimensionMismatch, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    config = OptimizerConfig(
        penalty_lambda=args.penalty,
        max_iterations=args.iters,
        fidelity_goal=args.fidelity_goal,
        initial_field=default_initial_field(args.T, args.steps, args.init_amplitude),
    )
    try:
        result = optimize_monotonic(system, args.N, args.T, psi0, psif, config)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MONOTONICITY
    save_field(outputs[0], result.field)
    summary = {"system": system.name, "N": args.N, "psi0": psi0_level, "psif": args.psif, "lambda": args.penalty}
    summary.update(result.summary())
    outputs[1].write_text(_dump(summary) + "\n")
    brief = {k: v for k, v in summary.items() if not k.endswith("_trace")}
    print(_dump(brief))
    return 0


def cmd_verify(args) -> int:
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read suite config: {exc}", file=sys.stderr)
            return EXIT_BAD_ARGS
    else:
        config = DEFAULT_SUITE
    outputs = []
    if args.out_prefix:
        outputs = [Path(f"{args.out_prefix}.verify.jsonl")]
        write_manifest(args.out_prefix, "verify", args, [args.config] if args.config else [], outputs)
    reports = run_suite(config)
    lines = [r.to_json() for r in reports]
    if lines:
        print("\n".join(lines))
    for path in outputs:
        path.write_text("".join(line + "\n" for line in lines))
    return 0 if all(r.passed for r in reports) else 1


def _fmt(value) -> str:
    if isinstance(value, float):
        if not math.isfinite(value):
            return str(value)
        return f"{value:.6g}"
    return str(value)


def cmd_report(args) -> int:
    try:
        doc = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read report: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    width = max(len(k) for k in doc)
    for key in sorted(doc):
        value = doc[key]
        if isinstance(value, dict):
            print(f"{key:<{width}}")
            for k, v in sorted(value.items()):
                print(f"  {k:<{width - 2}}  {_fmt(v)}")
        elif isinstance(value, list):
            print(f"{key:<{width}}  {'; '.join(map(str, value)) or '-'}")
        else:
            print(f"{key:<{width}}  {_fmt(value)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtrunc", description="Certified truncation sizes and control of weakly coupled quantum systems.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="rough and refined truncation dimensions")
    p.add_argument("--system", required=True, help="builtin name (rotor, oscillator) or JSON file")
    p.add_argument("--K", type=float, required=True, help="L1 budget of the field")
    p.add_argument("--eps", type=float, required=True, help="error threshold")
    p.add_argument("--psi0", type=int, help="initially populated level (default 1)")
    p.add_argument("--out-prefix", help="also write <prefix>.report.json")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("propagate", help="propagate a field file, write populations and leakage")
    p.add_argument("--system", required=True)
    p.add_argument("--N", type=int, required=True, help="number of levels kept")
    p.add_argument("--field", required=True, help="CSV (t,u) or JSON {dt, samples}")
    p.add_argument("--psi0", type=int)
    p.add_argument("--target", type=int, help="target level for the final distance")
    p.add_argument("--stride", type=int, default=1, help="record every n-th step")
    p.add_argument("--leak-threshold", type=float, default=1e-3)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("optimize", help="monotonic optimal control for a state transfer")
    p.add_argument("--system", default="rotor")
    p.add_argument("--N", type=int, default=50)
    p.add_argument("--T", type=float, default=math.pi)
    p.add_argument("--psi0", type=int)
    p.add_argument("--psif", type=int, default=2)
    p.add_argument("--lambda", dest="penalty", type=float, default=0.01, help="field-energy penalty")
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--steps", type=int, default=1000, help="field samples over [0, T]")
    p.add_argument("--init-amplitude", type=float, default=0.1)
    p.add_argument("--fidelity-goal", type=float, default=0.999)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("verify", help="run the bound verification suite")
    p.add_argument("--config", help="suite config JSON (default: built-in suite)")
    p.add_argument("--out-prefix", help="also write <prefix>.verify.jsonl")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="pretty-print a truncation report JSON")
    p.add_argument("report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
