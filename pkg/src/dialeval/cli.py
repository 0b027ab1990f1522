"""Command-line entry point wiring all harness modules for batch use.

Subcommands: validate, fixture, run-baseline, score, leaderboard,
correlate, export-train, serve.  Exit codes: 0 success, 1 validation or
data failure, 2 usage error.  Relative input paths resolve against
``DIALEVAL_DATA_DIR`` when that variable is set; outputs are written
where given.  Identical invocations on identical files produce
byte-identical machine reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from .corpus import (
    CorpusError,
    Dataset,
    load_dataset,
    load_predictions,
    make_fixture,
    save_dataset,
    save_predictions,
)
from .humaneval import Campaign, CampaignService, TaskKind
from .metrics import ALL_METRICS, COMPOSABLE_METRICS, MetricId
from .pipeline import (
    HarnessConfig,
    export_training_pairs,
    lexical_stages,
    run_pipeline,
    save_training_pairs,
)
from .scoring import (
    Leaderboard,
    ScoreReport,
    build_leaderboard,
    leaderboard_to_dict,
    load_report,
    metric_correlation_matrix,
    per_subset_report,
    report_to_dict,
    score_instances,
    score_submission,
)

DATA_DIR_ENV = "DIALEVAL_DATA_DIR"


def _resolve_input(path: str) -> Path:
    p = Path(path)
    data_dir = os.environ.get(DATA_DIR_ENV)
    if not p.is_absolute() and data_dir:
        return Path(data_dir) / p
    return p


def _write_json(payload: dict, path: str) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def _parse_metric_set(spec: str | None) -> list[MetricId]:
    if not spec:
        return list(ALL_METRICS)
    out = []
    for raw in spec.split(","):
        raw = raw.strip()
        try:
            out.append(MetricId(raw))
        except ValueError:
            known = ", ".join(m.value for m in ALL_METRICS)
            raise CorpusError(f"unknown metric {raw!r}; known metrics: {known}") from None
    return out


def _config_from_args(args: argparse.Namespace) -> HarnessConfig:
    kwargs = {}
    if getattr(args, "threshold", None) is not None:
        kwargs["detection_threshold"] = args.threshold
    if getattr(args, "window", None) is not None:
        kwargs["window"] = args.window
    if getattr(args, "negatives", None) is not None:
        kwargs["negatives_per_positive"] = args.negatives
    return HarnessConfig(**kwargs)


def _load_dataset_from_args(args: argparse.Namespace) -> Dataset:
    return load_dataset(
        _resolve_input(args.logs),
        _resolve_input(args.labels),
        _resolve_input(args.knowledge),
    )


def _print_report(report: ScoreReport) -> None:
    p, r, f = report.detection
    print(f"submission: {report.submission_id}")
    print(f"  detection        p={p:.4f}  r={r:.4f}  f={f:.4f}")
    for metric in COMPOSABLE_METRICS:
        composed = report.metrics[metric]
        print(
            f"  {metric.value:<12}  s_p={composed.precision:.4f}  "
            f"s_r={composed.recall:.4f}  s_f={composed.f:.4f}"
        )


def _print_leaderboard(board: Leaderboard) -> None:
    print(f"{'rank':<6}{'submission':<24}{'overall':<10}")
    for position, entry in enumerate(board.entries, start=1):
        print(f"{position:<6}{entry.submission_id:<24}{entry.overall:<10.4f}")


def cmd_validate(args: argparse.Namespace) -> int:
    dataset = _load_dataset_from_args(args)
    seeking = sum(1 for lb in dataset.labels if lb.target)
    print(f"instances: {len(dataset)}")
    print(f"knowledge-seeking turns: {seeking}")
    print(f"knowledge snippets: {len(dataset.kb)}")
    if args.predictions:
        predictions = load_predictions(_resolve_input(args.predictions), dataset)
        predicted = sum(1 for e in predictions if e.target)
        print(f"predictions: {len(predictions)} entries, {predicted} predicted positive")
    print("ok")
    return 0


def cmd_fixture(args: argparse.Namespace) -> int:
    dataset = make_fixture(
        seed=args.seed, n_dialogues=args.dialogues, n_snippets=args.snippets
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logs, labels, knowledge = out / "logs.json", out / "labels.json", out / "knowledge.json"
    save_dataset(dataset, logs, labels, knowledge)
    print(f"wrote {logs}")
    print(f"wrote {labels}")
    print(f"wrote {knowledge}")
    return 0


def cmd_run_baseline(args: argparse.Namespace) -> int:
    dataset = _load_dataset_from_args(args)
    cfg = _config_from_args(args)
    predictions = run_pipeline(dataset, lexical_stages(dataset.kb, cfg), cfg)
    save_predictions(predictions, args.out)
    predicted = sum(1 for e in predictions if e.target)
    print(f"wrote {args.out} ({len(predictions)} entries, {predicted} predicted positive)")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    dataset = _load_dataset_from_args(args)
    predictions = load_predictions(_resolve_input(args.predictions), dataset)
    submission_id = args.submission_id or Path(args.predictions).stem
    scores = score_instances(dataset, predictions)
    report = score_submission(dataset, predictions, submission_id)
    _print_report(report)
    if args.subset:
        tags = json.loads(_resolve_input(args.subset).read_text(encoding="utf-8"))
        for subset in per_subset_report(scores, tags, submission_id=submission_id):
            flag = " (empty)" if subset.empty else ""
            print(f"subset {subset.tag.value}: {subset.n_instances} instances{flag}")
            _print_report(subset.report)
    if args.out:
        _write_json(report_to_dict(report), args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_leaderboard(args: argparse.Namespace) -> int:
    reports = [load_report(_resolve_input(p)) for p in args.reports]
    metric_set = _parse_metric_set(args.metrics)
    board = build_leaderboard(reports, metric_set)
    _print_leaderboard(board)
    if args.out:
        _write_json(leaderboard_to_dict(board), args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_correlate(args: argparse.Namespace) -> int:
    if len(args.reports) < 2:
        print("correlate needs at least two reports", file=sys.stderr)
        return 1
    reports = [load_report(_resolve_input(p)) for p in args.reports]
    metric_set = _parse_metric_set(args.metrics)
    matrix = metric_correlation_matrix(reports, metric_set)
    header = "".join(f"{m.value:>12}" for m in metric_set)
    print(f"{'metric':<14}{header}")
    for a in metric_set:
        cells = "".join(
            f"{matrix[a][b]:>12.4f}" if matrix[a][b] is not None else f"{'n/a':>12}"
            for b in metric_set
        )
        print(f"{a.value:<14}{cells}")
    if args.out:
        payload = {
            "metric_set": [m.value for m in metric_set],
            "matrix": {
                a.value: {b.value: matrix[a][b] for b in metric_set} for a in metric_set
            },
        }
        _write_json(payload, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_export_train(args: argparse.Namespace) -> int:
    dataset = _load_dataset_from_args(args)
    cfg = _config_from_args(args)
    pairs = export_training_pairs(dataset, cfg, rng_seed=args.seed)
    save_training_pairs(pairs, args.out)
    positive = sum(1 for p in pairs if p.label.value == "positive")
    print(f"wrote {args.out} ({positive} positive, {len(pairs) - positive} negative)")
    return 0


def build_campaign_service(args: argparse.Namespace) -> CampaignService:
    dataset = _load_dataset_from_args(args)
    submissions = {}
    for path in args.predictions:
        sid = Path(path).stem
        if sid in submissions:
            raise CorpusError(f"duplicate submission id {sid!r}; rename the file")
        submissions[sid] = load_predictions(_resolve_input(path), dataset)
    tasks = tuple(TaskKind(t) for t in args.tasks.split(","))
    campaign = Campaign(
        campaign_id=args.campaign,
        dataset=dataset,
        submissions=submissions,
        tasks=tasks,
    )
    return CampaignService([campaign], args.store, lease_seconds=args.lease_seconds)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .humaneval.api import create_app

    service = build_campaign_service(args)
    app = create_app(service)
    print(f"serving campaign {args.campaign!r} on port {args.port} (store: {args.store})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialeval",
        description="Scoring harness for knowledge-grounded task-oriented dialogue",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--logs", required=True, help="dialogue logs file")
        p.add_argument("--labels", required=True, help="ground-truth labels file")
        p.add_argument("--knowledge", required=True, help="knowledge base file")

    p = sub.add_parser("validate", help="load and cross-validate data files")
    add_data_flags(p)
    p.add_argument("--predictions", help="optional predictions file to validate")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fixture", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--dialogues", type=int, default=100)
    p.add_argument("--snippets", type=int, default=40)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("run-baseline", help="run the lexical reference pipeline")
    add_data_flags(p)
    p.add_argument("--out", required=True, help="predictions output file")
    p.add_argument("--threshold", type=float, help="detection threshold")
    p.add_argument("--window", type=int, help="context window in turns")
    p.set_defaults(func=cmd_run_baseline)

    p = sub.add_parser("score", help="score a predictions file against the labels")
    add_data_flags(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--submission-id", help="defaults to the predictions file stem")
    p.add_argument("--subset", help="JSON array of per-instance subset tags")
    p.add_argument("--out", help="machine-readable report file")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("leaderboard", help="rank submission reports")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--metrics", help="comma list overriding the ranked metric set")
    p.add_argument("--out", help="leaderboard JSON output")
    p.set_defaults(func=cmd_leaderboard)

    p = sub.add_parser("correlate", help="metric-pair rank correlation matrix")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--metrics", help="comma list of metrics to correlate")
    p.add_argument("--out", help="matrix JSON output")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("export-train", help="export selection training pairs")
    add_data_flags(p)
    p.add_argument("--out", required=True, help="JSONL output file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negatives", type=int, help="negatives per positive")
    p.add_argument("--window", type=int, help="context window in turns")
    p.set_defaults(func=cmd_export_train)

    p = sub.add_parser("serve", help="run the human-rating collection service")
    add_data_flags(p)
    p.add_argument("--predictions", nargs="+", required=True,
                   help="one or more submission prediction files")
    p.add_argument("--campaign", default="campaign-1")
    p.add_argument("--tasks", default="appropriateness,accuracy",
                   help="comma list from: appropriateness,accuracy,pairwise")
    p.add_argument("--store", default="ratings.ndjson", help="append-only rating store")
    p.add_argument("--lease-seconds", type=float, default=1800.0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        return args.func(args)
    except CorpusError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
