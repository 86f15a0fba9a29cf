"""Command-line harness: run experiments, verify manifests, run single checks."""
from __future__ import annotations

import argparse
import sys

from .bounds import CHECKS
from .config import ConfigError, parse_config
from .runner import EXIT_CONFIG, EXIT_IO, run_experiment, verify_manifest


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randmisfit",
        description=(
            "Randomized-misfit posterior approximation checks on dense "
            "quadrature grids."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run every check configured in a JSON file")
    run_p.add_argument("--config", required=True, help="path to the JSON config")
    run_p.add_argument("--seed", type=int, default=None, help="override master_seed")
    run_p.add_argument("--out", default=None, help="override the output directory")
    run_p.add_argument("--threads", type=int, default=1, help="worker threads over fidelities")

    verify_p = sub.add_parser("verify", help="re-check a manifest's hashes and verdicts")
    verify_p.add_argument("manifest", help="path to manifest.json")

    sweep_p = sub.add_parser("sweep", help="run a single check from a config")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--check", required=True, choices=CHECKS)
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--out", default=None)
    sweep_p.add_argument("--threads", type=int, default=1)
    return parser


def _load_config(args: argparse.Namespace):
    config = parse_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if getattr(args, "check", None) is not None:
        if args.check not in config.checks:
            raise ConfigError(
                f"check {args.check!r} is not runnable for this config "
                f"(configured: {list(config.checks)})"
            )
        config = config.with_checks((args.check,))
    return config


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            ok, messages = verify_manifest(args.manifest)
            for msg in messages:
                print(msg)
            return 0 if ok else 1
        config = _load_config(args)
        manifest, code = run_experiment(config, out_dir=args.out, threads=args.threads)
        for check, verdict in manifest.verdicts.items():
            state = {True: "pass", False: "FAIL", None: "indeterminate"}[verdict]
            print(f"{check}: {state}")
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
