"""Command-line entry points: train, eval, and emit.

train fits a fresh agent and writes a checkpoint plus trace and figure
CSVs; eval replays a checkpoint's greedy policy; emit regenerates one
figure CSV from a stored trace. All CSVs use LF line endings.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .harness import RunTrace, oracle_agreement, run_inference, run_training

FIGURES = ("success", "conflicts", "modes")

# Changing these on eval of an existing checkpoint would silently change the
# model or scenario the checkpoint's weights were trained for.
STRUCTURAL_KEYS = (
    "channels",
    "hidden_size",
    "sensor_slope",
    "sensor_intercept",
    "user_slope",
    "user_intercept",
)


class CliError(Exception):
    pass


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig().validate()
    return _apply_overrides(config, args)


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "shield", None) is not None:
        config.shield = args.shield == "on"
    return config.validate()


def _write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_success_csv(trace: RunTrace, path: str):
    """Success percentage per mode occurrence (occurrences without
    confrontations carry no rate and are skipped)."""
    rows = [
        (m, 100.0 * occ.wins / occ.confrontations)
        for m, occ in enumerate(trace.ledger.occurrences, start=1)
        if occ.confrontations > 0
    ]
    _write_csv(path, ("run_index", "P_mj_percent"), rows)


def write_conflicts_csv(trace: RunTrace, path: str):
    rows = [(r.step, r.cumulative_conflicts) for r in trace.rows]
    _write_csv(path, ("timeslot", "cumulative_conflicts"), rows)


def write_modes_csv(trace: RunTrace, path: str):
    rows = [(r.step, r.mode_code) for r in trace.rows]
    _write_csv(path, ("timeslot", "mode_code"), rows)


_FIGURE_WRITERS = {
    "success": ("success_rate.csv", write_success_csv),
    "conflicts": ("conflicts.csv", write_conflicts_csv),
    "modes": ("modes.csv", write_modes_csv),
}


def write_figures(trace: RunTrace, out_dir: str):
    for name, writer in _FIGURE_WRITERS.values():
        writer(trace, os.path.join(out_dir, name))


def write_trace(trace: RunTrace, path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(trace.to_payload(), fh)
        fh.write("\n")


def read_trace(path: str) -> RunTrace:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return RunTrace.from_payload(payload)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: not a usable trace file ({exc})") from None


def _summarize(trace: RunTrace) -> str:
    return (
        f"{trace.phase}: slots={len(trace.rows)}"
        f" conflicts={trace.total_conflicts()}"
        f" success={trace.ledger.overall_percent():.1f}%"
        f" searching_fraction={trace.mode_fraction(1):.3f}"
        f" oracle_agreement={oracle_agreement(trace):.3f}"
    )


def cmd_train(args) -> int:
    config = _load_run_config(args)
    os.makedirs(args.out, exist_ok=True)
    result = run_training(config)
    save_checkpoint(
        os.path.join(args.out, "checkpoint.json"),
        config,
        result.policy,
        result.critic,
        result.constraint,
        result.rng,
        result.episodes_trained,
    )
    write_trace(result.trace, os.path.join(args.out, "train_trace.json"))
    write_figures(result.trace, args.out)
    print(f"checkpoint: {os.path.join(args.out, 'checkpoint.json')}")
    print(_summarize(result.trace))
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    config = ckpt.config
    if args.config:
        override = load_config(args.config)
        mismatched = [
            key
            for key in STRUCTURAL_KEYS
            if getattr(override, key) != getattr(config, key)
        ]
        if mismatched:
            raise CliError(
                "config incompatible with checkpoint on: " + ", ".join(mismatched)
            )
        config = override
    config = _apply_overrides(config, args)

    os.makedirs(args.out, exist_ok=True)
    trace = run_inference(ckpt.policy, ckpt.constraint, config)
    write_trace(trace, os.path.join(args.out, "eval_trace.json"))
    write_figures(trace, args.out)
    print(_summarize(trace))
    return 0


def cmd_emit(args) -> int:
    trace = read_trace(args.trace)
    os.makedirs(args.out, exist_ok=True)
    name, writer = _FIGURE_WRITERS[args.figure]
    path = os.path.join(args.out, name)
    writer(trace, path)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safejam",
        description="Train and evaluate a user-safe jamming agent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train an agent and write a checkpoint")
    train.add_argument("--config", help="key=value configuration file")
    train.add_argument("--out", required=True, help="output directory")
    train.add_argument("--seed", type=int, help="override the configured seed")
    train.add_argument("--shield", choices=("on", "off"), help="override the shield")
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="run greedy inference from a checkpoint")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--config", help="override non-structural settings")
    evaluate.add_argument("--out", required=True, help="output directory")
    evaluate.add_argument("--seed", type=int, help="override the configured seed")
    evaluate.add_argument("--shield", choices=("on", "off"), help="override the shield")
    evaluate.set_defaults(func=cmd_eval)

    emit = sub.add_parser("emit", help="regenerate a figure CSV from a trace")
    emit.add_argument("--trace", required=True, help="trace JSON written by train/eval")
    emit.add_argument("--figure", required=True, choices=FIGURES)
    emit.add_argument("--out", required=True, help="output directory")
    emit.set_defaults(func=cmd_emit)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, CheckpointError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
