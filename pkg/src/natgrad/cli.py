"""Command line entry point: ``natgrad run|compare|diagnostics|validate``."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import ConfigError
from .experiment import compare_methods, load_config, run_diagnostics, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_DIAGNOSTICS = 0, 1, 2, 3


def _overrides(args) -> dict:
    return dict(seed=args.seed, iterations=args.iterations, epsilon=args.epsilon,
                alpha=args.alpha, method=args.method, out=args.out)


def _load(args, *, single_method: bool):
    cfg = load_config(args.config, **_overrides(args))
    # a flag for one step parameter replaces the other in single-method runs
    if single_method and args.epsilon is not None and args.alpha is None:
        cfg = dataclasses.replace(cfg, alpha=None)
    if single_method and args.alpha is not None and args.epsilon is None:
        cfg = dataclasses.replace(cfg, epsilon=None)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args, single_method=True)
    # comparison configs carry both step parameters; keep the one the method uses
    if cfg.compare_methods:
        cfg = cfg.for_method(cfg.method)
    cfg.validate()
    table = run_experiment(cfg)
    if not cfg.out:
        sys.stdout.write(table.to_csv())
    if table.aborted:
        print(f"run aborted at {table.aborted}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args, single_method=False)
    report = compare_methods(cfg)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(report.to_csv())
    print(report.text_summary())
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args, single_method=True)
    cfg.validate(for_compare=bool(cfg.compare_methods or cfg.compare_seeds))
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_diagnostics(args) -> int:
    report = run_diagnostics()
    print(report.text())
    return EXIT_OK if report.passed else EXIT_DIAGNOSTICS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="natgrad", description="Vanilla and natural policy gradient experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--iterations", type=int)
        p.add_argument("--epsilon", type=float, help="KL budget per update (natural methods)")
        p.add_argument("--alpha", type=float, help="step size (vanilla)")
        p.add_argument("--method")
        p.add_argument("--out", help="write CSV here instead of stdout")
        return p

    with_config("run", "train one policy and emit per-iteration metrics CSV").set_defaults(func=cmd_run)
    with_config("compare", "race several methods over a seed set").set_defaults(func=cmd_compare)
    with_config("validate", "check a config file without running it").set_defaults(func=cmd_validate)
    sub.add_parser("diagnostics", help="recompute the numerical checks").set_defaults(
        func=cmd_diagnostics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
