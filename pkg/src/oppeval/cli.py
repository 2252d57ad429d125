"""Command line front end: one subcommand per pipeline stage."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import ValidationError, pipeline
from .config import load_config
from .synth import CorpusSpec


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; our contract reserves 2 for I/O
    def error(self, message):
        raise _UsageError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the configured RNG seed")
    parser.add_argument("--config", default=argparse.SUPPRESS,
                        help="YAML config path (defaults apply when omitted)")
    parser.add_argument("--out", default=argparse.SUPPRESS,
                        help="output root directory (default: ./out)")


def build_parser() -> _Parser:
    parser = _Parser(prog="oppeval",
                     description="patient-specific preictal period evaluation")
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic annotated corpus")
    p.add_argument("--patients", type=int, default=CorpusSpec.n_patients)
    p.add_argument("--seizures", type=int, default=CorpusSpec.n_seizures)
    p.add_argument("--ramp-min", type=float, default=CorpusSpec.ramp_min,
                   dest="ramp_min")

    p = sub.add_parser("preprocess", help="re-reference, bandpass, store recordings")
    p.add_argument("--low", type=float, default=argparse.SUPPRESS)
    p.add_argument("--high", type=float, default=argparse.SUPPRESS)
    p.add_argument("--order", type=int, default=argparse.SUPPRESS)
    p.add_argument("--epoch", type=float, default=argparse.SUPPRESS)

    sub.add_parser("dataset", help="eligibility, extraction, split manifests")
    sub.add_parser("train", help="train baseline classifiers for every split")
    sub.add_parser("evaluate", help="segment-wise metrics for every split")

    p = sub.add_parser("ciopr", help="sigmoid fits and timing scores per seizure")
    p.add_argument("--predictions-dir", dest="predictions_dir", default=None,
                   help="read prediction series from this directory instead of "
                        "scoring with the trained baseline")

    sub.add_parser("opp", help="select each patient's optimal preictal period")
    sub.add_parser("stats", help="Friedman test across preictal definitions")
    sub.add_parser("report", help="final tables and output-profile plots")

    for sp in sub.choices.values():
        _add_common(sp)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    config = load_config(getattr(args, "config", None))
    if hasattr(args, "seed"):
        config = replace(config, seed=args.seed)
    out = Path(getattr(args, "out", "out"))

    if args.command == "synth":
        spec = CorpusSpec(n_patients=args.patients, n_seizures=args.seizures,
                          ramp_min=args.ramp_min)
        pipeline.stage_synth(out, config, spec)
    elif args.command == "preprocess":
        fc = config.filter
        fc = replace(fc, low_hz=getattr(args, "low", fc.low_hz),
                     high_hz=getattr(args, "high", fc.high_hz),
                     order=getattr(args, "order", fc.order))
        config = replace(config, filter=fc,
                         epoch_s=getattr(args, "epoch", config.epoch_s))
        pipeline.stage_preprocess(out, config)
    elif args.command == "dataset":
        pipeline.stage_dataset(out, config)
    elif args.command == "train":
        pipeline.stage_train(out, config)
    elif args.command == "evaluate":
        pipeline.stage_evaluate(out, config)
    elif args.command == "ciopr":
        pipeline.stage_ciopr(out, config, predictions_dir=args.predictions_dir)
    elif args.command == "opp":
        pipeline.stage_opp(out, config)
    elif args.command == "stats":
        pipeline.stage_stats(out, config)
    elif args.command == "report":
        pipeline.stage_report(out, config)
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _dispatch(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
