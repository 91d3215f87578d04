"""Command-line interface for the claim-verification pipeline.

Every subcommand takes --config pointing at the JSON pipeline config.
Exit codes: 0 success, 1 validation error, 2 backend failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .errors import BackendError, ValidationError
from .store import read_doc


class _Parser(argparse.ArgumentParser):
    # Usage mistakes are validation errors (exit 1), not backend failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="path to the JSON pipeline config")
    sub.add_argument("--seed", type=int, default=None, help="override the split seed")
    sub.add_argument("--limit", type=int, default=None,
                     help="ingest only the first N records (fixture runs)")
    sub.add_argument("--summarizer", default=None, help="override the summarizer backend id")
    sub.add_argument("--classifier", default=None, help="override the classifier backend id")
    sub.add_argument("--nli", default=None, help="override the NLI backend id")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="claimcheck", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    commands = {
        "ingest": "parse, clean, and store the corpus with statistics",
        "stats": "print statistics of the cleaned corpus",
        "split": "write the train/validation/test split manifest",
        "rationales": "generate one rationale per record",
        "train": "fine-tune the verdict classifier on the train split",
        "predict": "classify every record with the trained backend",
        "nle": "assemble the natural-language explanations",
        "explain": "attribute rationale generation over evidence features",
        "eval-f1": "score predictions with macro-F1 per split",
        "eval-nli": "audit test-split explanations with entailment checks",
        "annotate-export": "export a seeded sample of annotation tasks",
        "annotate-aggregate": "aggregate filled annotation files",
        "report": "merge evaluation artifacts into one report",
    }
    for name, help_text in commands.items():
        cmd = sub.add_parser(name, help=help_text)
        _add_common(cmd)
        if name == "annotate-export":
            cmd.add_argument("--n", type=int, default=None, help="number of tasks to sample")
        if name == "annotate-aggregate":
            cmd.add_argument("files", nargs="+", help="filled annotation files")

    run_cmd = sub.add_parser("run", help="run one named pipeline stage")
    _add_common(run_cmd)
    run_cmd.add_argument("--stage", required=True, choices=sorted(pipeline.STAGES),
                         help="stage to run (upstream artifacts must exist)")
    return parser


def _print(payload: dict) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False))


def _print_ingest(summary: dict) -> None:
    print(f"records: {summary['total']}")
    for label, count in summary["per_label"].items():
        print(f"  {label}: {count}")
    print(f"mean claim tokens: {summary['mean_claim_tokens']:.1f}")
    print(f"mean evidence tokens: {summary['mean_evidence_tokens']:.1f}")
    if summary["dropped_ids"]:
        print(f"dropped (evidence fully blocklisted): {', '.join(summary['dropped_ids'])}")
    if summary["matches_benchmark"]:
        sizes = "/".join(str(s) for s in pipeline.BENCHMARK_SPLIT_SIZES)
        labels = ", ".join(
            f"{label.value} {count}" for label, count in pipeline.BENCHMARK_PER_LABEL.items()
        )
        print("corpus matches the published benchmark release:")
        print(f"  total {pipeline.BENCHMARK_TOTAL}, {labels}; "
              f"expected split sizes {sizes} at ratios 0.70/0.15/0.15")


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = pipeline.load_config(
            args.config,
            seed=args.seed,
            limit=args.limit,
            summarizer=args.summarizer,
            classifier=args.classifier,
            nli=args.nli,
        )
        command = args.command
        if command == "ingest":
            _print_ingest(pipeline.stage_ingest(config))
        elif command == "stats":
            doc = read_doc(config.artifact(pipeline.CORPUS_STATS), "stats", config.config_hash)
            _print({k: doc[k] for k in
                    ("total", "per_label", "mean_claim_tokens", "mean_evidence_tokens")})
        elif command == "eval-f1":
            _print(pipeline.stage_eval_f1(config))
        elif command == "eval-nli":
            _print(pipeline.stage_eval_nli(config))
        elif command == "annotate-export":
            _print(pipeline.export_annotations(config, n=args.n))
        elif command == "annotate-aggregate":
            _print(pipeline.aggregate_annotation_files(config, args.files))
        elif command == "report":
            _print(pipeline.build_report(config))
        elif command == "run":
            _print(pipeline.run_stage(config, args.stage))
        else:
            _print(pipeline.run_stage(config, command))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
