"""Command-line entry point: ``gbsc <command> [flags]``.

Exit codes: 0 ok, 1 data error, 2 usage error, 3 oracle check out of tolerance.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, core
from .core import ConfigurationError
from .experiment import (
    DEFAULT_SEED,
    MaskConfig,
    TrainingConfig,
    derive_rng,
    mask_experiment,
    replicate_seed,
    sweep_k,
    train,
    utilization_counts,
)
from .mushroom import (
    ATTRIBUTE_NAMES,
    DatasetError,
    analytic_oracle_gap,
    load_dataset,
    oracle_gap_experiment,
)

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_CHECK = 3

DATA_ENV = "GBSC_DATA"
# keeps oracle-check independent of the --seed used by the training commands
_ORACLE_KEY = 4


class UsageError(Exception):
    pass


def _version() -> str:
    return __version__


def parse_k_list(text: str) -> list[int]:
    """``"1..22"``, ``"1,2,5"`` and mixes such as ``"1..3,8"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..")
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise ValueError
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"invalid k list {text!r}") from None
    if not out:
        raise UsageError("empty k list")
    return out


def _count(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _rate(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"rate must be in [0, 1], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help=f"agaricus-lepiota.data file (default: ${DATA_ENV})")
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="format of tabular outputs")

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--k", type=_positive, default=3)
    training.add_argument("--trials", type=_count, default=1500, help="training arms")
    training.add_argument("--epoch", type=_positive, default=150, help="training arms per epsilon epoch")
    training.add_argument("--eval-arms", type=_count, default=50)
    training.add_argument("--eval-replicates", type=_positive, default=10)

    parser = argparse.ArgumentParser(prog="gbsc", description="Greedy Bandits with Sampled Context on the Mushroom task.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common, training], help="train one model, write its regret curve and priors")

    p = sub.add_parser("sweep-k", parents=[common, training], help="final regret for a range of k")
    p.add_argument("--ks", default="1..22")
    p.add_argument("--replicates", type=_positive, default=10)

    p = sub.add_parser("importance", parents=[common, training], help="utilisation counts and learned priors")
    p.add_argument("--replicates", type=_positive, default=10)

    p = sub.add_parser("mask", parents=[common, training], help="masked versus intact evaluation")
    p.add_argument("--mode", choices=("random", "priority"), required=True)
    p.add_argument("--rate", type=_rate, required=True)
    p.add_argument("--utilization", help="utilization.csv from the importance command (priority mode)")
    p.add_argument("--replicates", type=_positive, default=10)

    p = sub.add_parser("oracle-check", parents=[common], help="risk-aware versus legacy oracle reward gap")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--arms", type=_count, default=50)
    p.add_argument("--tolerance", type=float, default=None, help="default: three standard errors")
    return parser


def _training_config(args) -> TrainingConfig:
    return TrainingConfig(
        total_training_arms=args.trials,
        epsilon_epoch_length=args.epoch,
        eval_arms=args.eval_arms,
        eval_replicates=args.eval_replicates,
        k=args.k,
        seed=args.seed,
    )


def _check_k(k: int, dataset) -> None:
    if not 1 <= k <= dataset.num_subsets:
        raise UsageError(f"k must be in [1, {dataset.num_subsets}] (the dataset has {dataset.num_subsets} context subsets), got {k}")


def _resolve_data(args) -> str:
    path = args.data or os.environ.get(DATA_ENV)
    if not path:
        raise UsageError(f"no dataset given; pass --data or set {DATA_ENV}")
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _table(name: str, header, rows, fmt: str):
    if fmt == "json":
        records = [dict(zip(header, r)) for r in rows]
        return f"{name}.json", _json_text({"columns": list(header), "rows": records})
    return f"{name}.csv", _csv_text(header, rows)


def _num(x: float):
    # NaN is not valid JSON
    return None if isinstance(x, float) and math.isnan(x) else x


def priors_document(model: core.GbscModel, names=ATTRIBUTE_NAMES) -> dict:
    subsets = []
    for subset in model.subsets:
        subsets.append(
            {
                "index": subset.index,
                "name": names[subset.index] if subset.index < len(names) else str(subset.index),
                "nodes": [{"value": v, "alpha": p.alpha, "beta": p.beta} for v, p in subset.nodes.items()],
            }
        )
    return {"num_subsets": model.num_subsets, "k": model.k, "epoch": model.epoch, "subsets": subsets}


def _manifest(command: str, config: dict, seed: int, checksum: str) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "dataset_sha256": checksum,
        "version": _version(),
    }


def write_outputs(out_dir, files: dict) -> list[Path]:
    """Write all files or none: stage in a temp directory, then rename into place."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with tempfile.TemporaryDirectory(dir=out, prefix=".gbsc-") as tmp:
        for name, text in files.items():
            (Path(tmp) / name).write_text(text, encoding="utf-8")
        for name in files:
            os.replace(Path(tmp) / name, out / name)
            written.append(out / name)
    return written


def cmd_train(args, dataset) -> dict:
    _check_k(args.k, dataset)
    config = _training_config(args)
    model, curve = train(config, dataset)
    rows = [
        (p.arms_completed, i, v, p.cumulative)
        for p in curve.points
        for i, v in enumerate(p.per_arm)
    ]
    files = dict([_table("curve", ("arms_completed", "arm_index", "expected_regret", "cumulative"), rows, args.format)])
    files["priors.json"] = _json_text(priors_document(model))
    files["manifest.json"] = _json_text(_manifest("train", asdict(config), config.seed, dataset.checksum))
    return files


def cmd_sweep_k(args, dataset) -> dict:
    ks = parse_k_list(args.ks)
    for k in ks:
        _check_k(k, dataset)
    config = _training_config(args)
    rows = sweep_k(ks, args.replicates, config, dataset)
    table = [(r.k, r.mean, _num(r.stddev) if args.format == "json" else r.stddev, r.replicates) for r in rows]
    files = dict([_table("ksweep", ("k", "mean_cum_regret", "stddev", "replicates"), table, args.format)])
    snapshot = {**asdict(config), "ks": ks, "replicates": args.replicates}
    files["manifest.json"] = _json_text(_manifest("sweep-k", snapshot, config.seed, dataset.checksum))
    return files


def cmd_importance(args, dataset) -> dict:
    _check_k(args.k, dataset)
    config = _training_config(args)
    table = utilization_counts(config, dataset, args.replicates)
    # priors of replicate 0, the first model the counts were taken from
    model, _ = train(replace(config, seed=replicate_seed(config.seed, 0)), dataset, record_curve=False)
    rows = [
        (s, ATTRIBUTE_NAMES[s], int(table.play[s]), int(table.no_play[s]))
        for s in range(dataset.num_subsets)
    ]
    files = dict([_table("utilization", ("subset_index", "subset_name", "play_count", "noplay_count"), rows, args.format)])
    files["priors.json"] = _json_text(priors_document(model))
    snapshot = {**asdict(config), "replicates": args.replicates}
    files["manifest.json"] = _json_text(_manifest("importance", snapshot, config.seed, dataset.checksum))
    return files


def read_utilization(path, num_subsets: int) -> np.ndarray:
    """Total (play + no-play) count per subset from a ``utilization.csv`` file."""
    totals = np.zeros(num_subsets)
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            try:
                s = int(row["subset_index"])
                totals[s] = float(row["play_count"]) + float(row["noplay_count"])
            except (KeyError, ValueError, IndexError, TypeError) as exc:
                raise UsageError(f"{path}: bad utilization row {row} ({exc})") from None
            seen.add(s)
    if seen != set(range(num_subsets)):
        raise UsageError(f"{path}: expected rows for subsets 0..{num_subsets - 1}")
    return totals


def cmd_mask(args, dataset) -> dict:
    _check_k(args.k, dataset)
    config = _training_config(args)
    if args.mode == "priority":
        if not args.utilization:
            raise UsageError("priority masking needs --utilization (output of the importance command)")
        if not Path(args.utilization).is_file():
            raise UsageError(f"utilization file not found: {args.utilization}")
        mask = MaskConfig.priority(args.rate, read_utilization(args.utilization, dataset.num_subsets))
    else:
        mask = MaskConfig.random(args.rate, dataset.num_subsets)
    result = mask_experiment(config, mask, dataset, args.replicates)
    rows = [(args.mode, args.rate, result.masked_cumulative, result.unmasked_cumulative, result.delta, args.replicates)]
    files = dict([_table("mask", ("mode", "rate", "masked_cum", "unmasked_cum", "delta", "replicates"), rows, args.format)])
    snapshot = {**asdict(config), "mode": args.mode, "rate": args.rate, "weights": list(mask.weights), "replicates": args.replicates}
    files["manifest.json"] = _json_text(_manifest("mask", snapshot, config.seed, dataset.checksum))
    return files


def cmd_oracle_check(args, dataset, stdout) -> int:
    if args.replicates < 2:
        raise UsageError("--replicates must be at least 2")
    rng = derive_rng(args.seed, _ORACLE_KEY)
    mean, std = oracle_gap_experiment(dataset, args.replicates, args.arms, rng)
    analytic = analytic_oracle_gap(dataset, args.arms)
    tolerance = args.tolerance if args.tolerance is not None else 3 * std / math.sqrt(args.replicates)
    ok = abs(mean - analytic) <= tolerance
    report = {
        "replicates": args.replicates,
        "arms": args.arms,
        "mean": mean,
        "stddev": std,
        "analytic": analytic,
        "tolerance": tolerance,
        "degenerate": args.arms == 0,
        "pass": bool(ok),
    }
    if args.format == "json":
        stdout.write(_json_text(report))
    else:
        stdout.write(f"replicates {args.replicates}  arms {args.arms}\n")
        stdout.write(f"mean gap   {mean:.4f}\n")
        stdout.write(f"stddev     {std:.4f}\n")
        stdout.write(f"analytic   {analytic:.4f}\n")
        stdout.write(f"tolerance  {tolerance:.4f}\n")
        if args.arms == 0:
            stdout.write("degenerate: no arms drawn\n")
        stdout.write("PASS\n" if ok else "FAIL\n")
    return EXIT_OK if ok else EXIT_CHECK


_COMMANDS = {
    "train": cmd_train,
    "sweep-k": cmd_sweep_k,
    "importance": cmd_importance,
    "mask": cmd_mask,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        path = _resolve_data(args)
        try:
            dataset = load_dataset(path)
        except (OSError, DatasetError) as exc:
            print(f"gbsc: data error: {exc}", file=stderr)
            return EXIT_DATA
        if args.command == "oracle-check":
            return cmd_oracle_check(args, dataset, stdout)
        files = _COMMANDS[args.command](args, dataset)
        for written in write_outputs(args.out, files):
            print(written, file=stdout)
        return EXIT_OK
    except (UsageError, ConfigurationError) as exc:
        print(f"gbsc: {exc}", file=stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
