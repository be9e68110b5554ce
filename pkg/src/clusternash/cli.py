"""Command-line interface: run / sweep / analyze over flat-text configs.

Exit codes: 0 success (certificate holds, for analyze), 1 certificate is
advisory only, 2 invalid config or violated assumptions, 3 divergence.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    ConfigError,
    ExperimentDiverged,
    analyze_report,
    load_config,
    load_sweep_config,
    run_experiment,
    sweep_experiment,
)


def _add_common(parser, positions=True):
    parser.add_argument("config", help="path to a key = value config file")
    parser.add_argument("--seed", type=int, help="override base seed")
    parser.add_argument("--seeds", type=int, help="override number of seeds to average")
    parser.add_argument("--iters", type=int, help="override iteration count")
    parser.add_argument("--out", help="override output path prefix")
    parser.add_argument("--workers", type=int, help="parallel seed workers")
    if positions:
        parser.add_argument(
            "--log-positions",
            action="store_true",
            default=None,
            help="append per-agent action columns to the CSVs",
        )


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.seeds is not None:
        cfg.n_seeds = args.seeds
    if args.iters is not None:
        cfg.iters = args.iters
    if args.out is not None:
        cfg.out = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "log_positions", None):
        cfg.log_positions = True
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="clusternash",
        description="Gradient-free equilibrium seeking for multi-cluster games",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="execute seeded runs and write CSV trajectories"))
    _add_common(sub.add_parser("sweep", help="run a step-size sweep and summarize rates"))
    _add_common(sub.add_parser("analyze", help="print the convergence certificate report"), positions=False)
    args = parser.parse_args(argv)

    try:
        if args.command == "analyze":
            cfg = _apply_overrides(load_config(args.config), args)
            lines, code = analyze_report(cfg)
            print("\n".join(lines))
            return code
        if args.command == "run":
            cfg = _apply_overrides(load_config(args.config), args)
            if not cfg.out:
                raise ConfigError(cfg.source, 0, "output prefix required (out = ... or --out)")
            result = run_experiment(cfg)
            for path in result.csv_paths + [result.avg_path, result.meta_path]:
                print(f"wrote {path}")
            return 0
        sweep = load_sweep_config(args.config)
        _apply_overrides(sweep.base, args)
        if not sweep.base.out:
            raise ConfigError(sweep.base.source, 0, "output prefix required (out = ... or --out)")
        result = sweep_experiment(sweep)
        for label, _, steps, fit, plateau, _ in result.settings:
            print(
                f"{label}: alpha_max={steps.alpha_max:g} eps_alpha={steps.heterogeneity:.4f} "
                f"rate={fit.rate:.6g} plateau={plateau:.6g}"
            )
        print(f"wrote {result.summary_path}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ExperimentDiverged as exc:
        print(f"divergence: {exc}; partial output: {', '.join(exc.paths)}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
