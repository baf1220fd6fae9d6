"""Command line entry point: ``slris <subcommand> [flags]``.

Subcommands: gen-data, train, eval, sweep-theta, sweep-k, all.
Values come from the defaults, then ``--config`` (flat JSON), then flags.
On failure a single ``error: <Kind>: <message>`` line goes to stderr and the
exit status is 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataset as ds_mod
from . import harness
from . import neuralnet as nn


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--window-len", type=int, choices=(32, 128, 512), dest="window_len")
    p.add_argument("--realizations", type=int)
    p.add_argument("--perfect-classifier", action="store_true", default=None, dest="perfect_classifier")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slris", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="build a labeled dataset and save it (.risl)")
    _common(p)
    p.add_argument("--n-per-class", type=int, dest="n_per_class")

    p = sub.add_parser("train", help="train the CNN on a dataset file")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--report", help="where to write the training report (JSON)")

    p = sub.add_parser("eval", help="confusion matrix of a model on a dataset")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--test-split", action="store_true", help="evaluate only the held-out part of the training split")

    for name, helptext in (("sweep-theta", "SINR vs incidence angle"), ("sweep-k", "SINR vs number of RISs")):
        p = sub.add_parser(name, help=helptext + " (CSV)")
        _common(p)
        p.add_argument("--model", dest="model_path")

    p = sub.add_parser("all", help="run the whole pipeline into one directory")
    _common(p)
    p.add_argument("--n-per-class", type=int, dest="n_per_class")
    p.add_argument("--epochs", type=int)
    return parser


_CONFIG_FLAGS = ("seed", "out", "window_len", "realizations", "perfect_classifier", "n_per_class", "epochs", "model_path")


def _config(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    overrides = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k, None) is not None}
    return cfg.replace(**overrides)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def run(args) -> None:
    cfg = _config(args)
    cmd = args.command
    if cmd == "gen-data":
        data = harness.generate_data(cfg)
        out = args.out or f"dataset_L{cfg.window_len}.risl"
        ds_mod.save(data, out)
        print(f"wrote {len(data)} windows to {out}")
    elif cmd == "train":
        data = ds_mod.load(args.data)
        if data.L != cfg.window_len and args.window_len is None:
            cfg = cfg.replace(window_len=data.L)
        model, report = harness.train_model(cfg, data)
        out = args.out or "model.rism"
        nn.save_model(model, out)
        report_path = args.report or str(Path(out).with_suffix(".json"))
        Path(report_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        print(f"test accuracy {report.test_accuracy:.4f}; model -> {out}, report -> {report_path}")
    elif cmd == "eval":
        data = ds_mod.load(args.data)
        if args.test_split:
            data = ds_mod.split(data, cfg.split_ratio, cfg.seed).test
        ev = harness.eval_classifier(nn.load_model(cfg.model_path), data)
        _emit(ev.to_csv(), args.out)
    elif cmd in ("sweep-theta", "sweep-k"):
        fn = harness.sweep_theta if cmd == "sweep-theta" else harness.sweep_k
        _emit(harness.rows_to_csv(fn(cfg)), args.out)
    elif cmd == "all":
        paths = harness.run_all(cfg)
        for name, path in paths.items():
            print(f"{name}: {path}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        run(args)
    except Exception as exc:  # noqa: BLE001 - one-line machine-readable failure
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0
