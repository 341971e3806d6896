"""Command line entry point.

Every subcommand builds an experiment config and hands it to
:func:`harness.run_experiment`, so a CLI run and a config run of the same
checks produce the same report. Exit codes: 0 when every requested check is
certified, 1 when some check is violated, overflowed or errored, 2 for usage
and config errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import geometry, harness
from .harness import ConfigError


def _load_json(source: str) -> dict:
    path = Path(source)
    if not path.exists():
        path = harness.bundled_config_path(source)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"{path} is not valid JSON ({e.msg} at line {e.lineno})") from None


def _load_instance(source: str) -> dict:
    """An instance dict from an instance file, a config file or a bundled config name."""
    d = _load_json(source)
    d = d.get("instance", d)
    try:
        geometry.ProblemInstance.from_dict(d)
    except (geometry.GeometryError, ValueError) as e:
        raise ConfigError("instance", str(e)) from None
    return d


def _base_config(args, checks) -> dict:
    cfg = {"instance": _load_instance(args.instance), "checks": checks}
    for key in ("horizon", "seed", "k_max"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "scheme", None):
        cfg["scheme"] = {"kind": args.scheme}
    moduli = {}
    for key in ("gh", "rho", "mu", "phi", "gamma", "chi"):
        val = getattr(args, key, None)
        if val is not None:
            moduli["rho_approx" if key == "rho" and "metastability" in checks else key] = val
    if moduli:
        cfg["moduli"] = moduli
    return cfg


def _finish(report: harness.Report, args) -> int:
    if args.out:
        for path in report.write(args.out, args.format):
            print(path)
    else:
        sys.stdout.write(report.to_json())
    for name, c in report.checks.items():
        print(f"{name}: {c['status']}", file=sys.stderr)
    return report.exit_code


def cmd_run(args) -> int:
    raw = _load_json(args.config)
    for key in ("seed", "horizon", "k_max"):
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    if args.checks:
        raw["checks"] = args.checks.split(",")
    cfg = harness.ExperimentConfig.from_dict(raw)
    if args.out is None and cfg.output:
        args.out = cfg.output
    return _finish(harness.run_experiment(cfg), args)


def cmd_trace(args) -> int:
    cfg = harness.ExperimentConfig.from_dict(_base_config(args, []))
    report = harness.run_experiment(cfg)
    trace = report.artifacts["trace"]
    fmt = args.format or "csv"
    text = trace.to_csv() if fmt == "csv" else trace.to_json() + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"trace.{fmt}"
        path.write_text(text)
        print(path)
    else:
        sys.stdout.write(text)
    return 0


def cmd_certify_rate(args) -> int:
    cfg = _base_config(args, ["regularity-discovery", "phi", "cauchy-rate"] if args.mu in (None, "discover")
                       else ["phi", "cauchy-rate"])
    if args.grid_step is not None:
        cfg["discovery"] = {"grid_step": args.grid_step}
    return _finish(harness.run_experiment(cfg), args)


def cmd_certify_meta(args) -> int:
    cfg = _base_config(args, ["phi", "metastability"])
    cfg["moduli"] = {**cfg.get("moduli", {}), "mu": "zero"}  # unused by the metastability bound
    cfg["counterfunctions"] = args.g
    cfg["meta_k_max"] = args.k
    return _finish(harness.run_experiment(cfg), args)


def cmd_discover_mu(args) -> int:
    cfg = _base_config(args, ["regularity-discovery"])
    cfg["discovery"] = {"grid_step": args.grid_step, "ball_radius": args.radius,
                        "tail": None if args.no_tail else "linear"}
    return _finish(harness.run_experiment(cfg), args)


def cmd_falsify(args) -> int:
    cfg = _base_config(args, ["regularity-falsify"])
    cfg["samples"] = {"falsify": args.samples}
    if args.radius is not None:
        cfg["discovery"] = {"ball_radius": args.radius}
    return _finish(harness.run_experiment(cfg), args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fejerlab", description="Relativised Fejér monotonicity experiments.")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p, instance=True):
        if instance:
            p.add_argument("--instance", required=True,
                           help="instance or config JSON file, or a bundled config name")
        p.add_argument("--out", help="output directory (default: report to stdout)")
        p.add_argument("--format", choices=("csv", "json"), help="side-file format (default: both)")
        p.add_argument("--seed", type=int)
        p.add_argument("--horizon", type=int)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config", help="config JSON file or bundled config name")
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--checks", help="comma-separated subset of checks")
    common(p, instance=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="run the iteration and export its trace")
    p.add_argument("--scheme", choices=("dykstra", "picard", "km", "ishikawa", "halpern"))
    common(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("certify-rate", help="compute and check the Cauchy rate")
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--gh", help="G/H pair: identity, square, square-sound")
    p.add_argument("--rho", help="rho modulus, e.g. dykstra-uniform:b=2")
    p.add_argument("--mu", help="mu modulus, or 'discover'")
    p.add_argument("--phi", help="Phi modulus, or 'empirical'")
    p.add_argument("--grid-step", dest="grid_step", type=float)
    common(p)
    p.set_defaults(func=cmd_certify_rate)

    p = sub.add_parser("certify-meta", help="compute and check the metastability bound")
    p.add_argument("--k", type=int, default=5, help="check every precision up to this one")
    p.add_argument("--g", action="append", default=None, help="counterfunction (repeatable): 5, n, 2n, n+10")
    p.add_argument("--gh")
    p.add_argument("--rho", help="rho modulus, e.g. dykstra-approx-rho")
    p.add_argument("--chi", help="chi modulus, e.g. dykstra-approx-chi")
    p.add_argument("--gamma", help="gamma modulus, e.g. box-ball")
    p.add_argument("--phi")
    common(p)
    p.set_defaults(func=cmd_certify_meta)

    p = sub.add_parser("discover-mu", help="discover a modulus of regularity by grid search")
    p.add_argument("--grid-step", dest="grid_step", type=float, default=0.01)
    p.add_argument("--radius", type=float, help="ball radius around z (default b)")
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--no-tail", action="store_true", help="reject queries beyond k-max")
    common(p)
    p.set_defaults(func=cmd_discover_mu)

    p = sub.add_parser("falsify", help="search for counterexamples to a modulus of regularity")
    p.add_argument("--mu", required=True, help="mu modulus, e.g. zero, identity, table:file=mu.json")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--radius", type=float)
    p.add_argument("--k-max", dest="k_max", type=int)
    common(p)
    p.set_defaults(func=cmd_falsify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    if getattr(args, "g", False) is None:
        args.g = ["n"]
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
