"""Command-line harness: run experiment grids, synthesize datasets,
inspect result files."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .data import save_csv, synthesize
from .experiment import (
    ExperimentResult,
    emit_metrics,
    load_config,
    load_result,
    run_experiment,
)


def _pct(value) -> str:
    return "" if value is None else f"{100 * value:.2f}%"


def render_summary(result: ExperimentResult) -> str:
    """Console table; metric fractions rendered as percentages here only."""
    header = ["method", "noise", "rate", "seed", "test_acc", "noisy_prec",
              "clean_set", "status"]
    rows = [header]
    for c in result.cells:
        rows.append([c.method, c.noise_kind, f"{c.rate:g}", str(c.seed),
                     _pct(c.test_acc), _pct(c.noisy_precision),
                     "" if c.clean_set_size is None else str(c.clean_set_size),
                     "ok" if c.succeeded else f"FAILED: {c.error}"])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                     for row in rows)


def _parse_floats(text: str):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_ints(text: str):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _cmd_run(args) -> int:
    config = load_config(args.config)
    overrides = {}
    if args.method is not None:
        overrides["method"] = args.method
    if args.noise is not None:
        overrides["noise_kind"] = args.noise
    if args.rates is not None:
        overrides["rates"] = _parse_floats(args.rates)
    if args.seeds is not None:
        overrides["seeds"] = _parse_ints(args.seeds)
    if args.out is not None:
        overrides["out_dir"] = args.out
    if overrides:
        config = dataclasses.replace(config, **overrides)
    result = run_experiment(config, progress=print)
    written = emit_metrics(result, config.out_dir)
    print(render_summary(result))
    print(f"wrote {len(written)} files under {config.out_dir}")
    return 0 if result.all_succeeded else 1


def _cmd_synth(args) -> int:
    dataset = synthesize(args.classes, args.per_class, args.dim,
                         args.separation, args.seed)
    save_csv(dataset, args.out)
    print(f"wrote {len(dataset)} samples ({args.classes} classes, "
          f"dim {args.dim}) to {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    result = load_result(args.result)
    print(f"artifact version {result.version}; "
          f"{len(result.cells)} cells, "
          f"{'all succeeded' if result.all_succeeded else 'FAILURES present'}")
    print(render_summary(result))
    return 0 if result.all_succeeded else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jocot",
        description="Noisy-label learning benchmarks: consensus-taught "
                    "student vs co-training baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment grid from a config file")
    run_p.add_argument("--config", required=True, help="sectioned key=value config file")
    run_p.add_argument("--method", choices=["jocot", "coteaching", "coteachingplus",
                                            "jocor", "ce_baseline"])
    run_p.add_argument("--noise", choices=["pairflip", "symmetric"])
    run_p.add_argument("--rates", help="comma-separated noise rates, e.g. 0.2,0.4")
    run_p.add_argument("--seeds", help="comma-separated integer seeds, e.g. 1,2,3")
    run_p.add_argument("--out", help="output directory (overrides config)")
    run_p.set_defaults(func=_cmd_run)

    synth_p = sub.add_parser("synth", help="write a synthetic dataset CSV")
    synth_p.add_argument("--classes", type=int, default=12)
    synth_p.add_argument("--per-class", type=int, default=600, dest="per_class")
    synth_p.add_argument("--dim", type=int, default=51)
    synth_p.add_argument("--separation", type=float, default=3.0)
    synth_p.add_argument("--seed", type=int, default=0)
    synth_p.add_argument("--out", required=True)
    synth_p.set_defaults(func=_cmd_synth)

    inspect_p = sub.add_parser("inspect", help="summarize a result.json")
    inspect_p.add_argument("--result", required=True)
    inspect_p.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
