"""Command-line frontend: extract, train, evaluate, predict, explain, analyze, synth.

Every command is deterministic given its flags and ``--seed``.  Exit codes:
0 success, 1 usage error, 2 data error, 3 numeric failure.  The environment
variable ``RUBRICNET_CACHE`` may point at a directory used to cache parsed
scores.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, plots, report, synth
from .descriptors import (
    FEATURE_COLUMNS,
    FEATURE_LABELS,
    extract_features,
    extract_features_many,
    feature_matrix,
    read_feature_table,
    write_feature_table,
)
from .errors import NumericError, RubricnetError
from .ingest import (
    SCORE_SUFFIXES,
    load_corpus,
    load_piece_file,
    read_labels_csv,
    serialize_canonical_json,
)
from .model import boundary_flags, load_checkpoint, predict_level, save_checkpoint
from .training import SearchSpace, cross_validate, fold_split, random_search
from .util import dump_json_bytes

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _cache_dir() -> str | None:
    value = os.environ.get("RUBRICNET_CACHE")
    return value if value else None


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument(
        "--format",
        choices=["json", "markdown", "html", "csv"],
        default=None,
        help="output format where the command supports a choice",
    )

    parser = _Parser(prog="rubricnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="write the feature table CSV")
    p.add_argument("--scores", required=True, help="directory of score files")
    p.add_argument("--labels", default=None, help="labels CSV (id,level[,fold])")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("train", parents=[common], help="search + fit on one fold split")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--budget", type=int, default=50, help="random-search trials")
    p.add_argument("--fold", type=int, default=0, help="fold held out as the test set")
    p.add_argument("--k", type=int, default=None, help="grading scale size")
    p.add_argument("--head", choices=["ordinal", "one-hot"], default="ordinal")
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=20)

    p = sub.add_parser("evaluate", parents=[common], help="full cross-validation")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--head", choices=["ordinal", "one-hot"], default="ordinal")
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=20)

    p = sub.add_parser("predict", parents=[common], help="print the predicted level")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("piece", help="score file (.json/.musicxml/.xml)")

    p = sub.add_parser("explain", parents=[common], help="write a rubric report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--stats", required=True, help="grade statistics JSON from train/evaluate")
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")
    p.add_argument("piece")

    p = sub.add_parser("analyze", parents=[common], help="correlation, clustering, contributions")
    p.add_argument("--features", required=True, help="feature table CSV from extract")
    p.add_argument("--checkpoint", default=None, help="enables the contribution profile")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n-per-class", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--out-dir", required=True)

    return parser


def _space_from_args(args) -> SearchSpace:
    if args.budget < 1:
        raise _UsageError("--budget must be >= 1")
    if args.max_epochs < 0 or args.patience < 1:
        raise _UsageError("--max-epochs must be >= 0 and --patience >= 1")
    head = "one_hot" if args.head == "one-hot" else "ordinal"
    return SearchSpace(
        budget=args.budget, max_epochs=args.max_epochs, patience=args.patience, head=head
    )


def _collect_score_files(args) -> list[tuple[str, Path, int | None]]:
    scores = Path(args.scores)
    if not scores.is_dir():
        raise RubricnetError(f"score directory not found: {scores}")
    entries: list[tuple[str, Path, int | None]] = []
    if args.labels:
        for piece_id, level, _fold in read_labels_csv(args.labels):
            for suffix in SCORE_SUFFIXES:
                candidate = scores / f"{piece_id}{suffix}"
                if candidate.exists():
                    entries.append((piece_id, candidate, level))
                    break
            else:
                raise RubricnetError(f"no score file for id {piece_id!r} in {scores}")
    else:
        for path in sorted(scores.iterdir()):
            if path.suffix in SCORE_SUFFIXES and path.is_file():
                entries.append((path.stem, path, None))
        if not entries:
            raise RubricnetError(f"no score files in {scores}")
    return entries


def _cmd_extract(args) -> int:
    entries = _collect_score_files(args)
    cache = _cache_dir()
    pieces, failures = [], []
    for piece_id, path, level in entries:
        try:
            piece = load_piece_file(path, cache_dir=cache)
        except RubricnetError as exc:
            failures.append(f"{path}: {exc}")
            continue
        pieces.append((piece_id, piece, level))
    if failures:
        for line in failures:
            print(line, file=sys.stderr)
        print(f"extract failed for {len(failures)} file(s); no output written", file=sys.stderr)
        return EXIT_DATA
    vectors = extract_features_many([p for _, p, _ in pieces], jobs=args.jobs)
    rows = [(piece_id, level, fv) for (piece_id, _, level), fv in zip(pieces, vectors)]
    write_feature_table(args.out, rows)
    print(f"wrote {len(rows)} feature rows to {args.out}")
    return EXIT_OK


def _write_stats(path: Path, params, features, labels) -> None:
    stats = analysis.compute_grade_statistics(params, features, labels)
    path.write_bytes(dump_json_bytes(stats.to_json_dict()))


def _cmd_train(args) -> int:
    space = _space_from_args(args)
    corpus = load_corpus(
        args.scores, args.labels, k=args.k, seed=args.seed, cache_dir=_cache_dir(), jobs=args.jobs
    )
    pieces = sorted(corpus.pieces, key=lambda p: p.id)
    vectors = extract_features_many(pieces, jobs=args.jobs)
    features = {p.id: fv.as_array() for p, fv in zip(pieces, vectors)}
    labels = {p.id: p.label for p in pieces}

    n_folds = max(corpus.folds.values()) + 1
    if not 0 <= args.fold < n_folds:
        raise _UsageError(f"--fold must lie in [0, {n_folds - 1}]")
    train_ids, val_ids, _test_ids = fold_split(corpus.folds, args.fold, n_folds)

    def as_set(ids):
        ordered = sorted(ids)
        return (
            np.asarray([features[i] for i in ordered]),
            np.asarray([labels[i] for i in ordered], dtype=int),
        )

    train_set, val_set = as_set(train_ids), as_set(val_ids)
    seed_root = np.random.SeedSequence(args.seed).spawn(n_folds)[args.fold]
    config, train_report = random_search(
        space, train_set, val_set, corpus.k, seed=seed_root, jobs=args.jobs
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "checkpoint.json").write_bytes(save_checkpoint(train_report.best_params))
    (out_dir / "train_report.json").write_bytes(dump_json_bytes(train_report.to_json_dict()))
    _write_stats(out_dir / "grade_stats.json", train_report.best_params, *train_set)
    if train_report.best_params.head == "ordinal":
        for flag in boundary_flags(train_report.best_params):
            print(f"warning: {flag}", file=sys.stderr)
    print(
        f"fold {args.fold}: best val acc {train_report.best_val_acc:.3f} "
        f"(mse {train_report.best_val_mse:.3f}) with lr {config.learning_rate:.2e}, "
        f"batch {config.batch_size}"
    )
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    space = _space_from_args(args)
    corpus = load_corpus(
        args.scores, args.labels, k=args.k, seed=args.seed, cache_dir=_cache_dir(), jobs=args.jobs
    )
    pieces = sorted(corpus.pieces, key=lambda p: p.id)
    vectors = extract_features_many(pieces, jobs=args.jobs)
    features = {p.id: fv.as_array() for p, fv in zip(pieces, vectors)}
    labels = {p.id: p.label for p in pieces}
    result = cross_validate(corpus, space, seed=args.seed, jobs=args.jobs, features=features)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.csv").write_text(result.to_metrics_csv())
    for outcome in result.folds:
        params = outcome.report.best_params
        (out_dir / f"fold-{outcome.fold}.checkpoint.json").write_bytes(save_checkpoint(params))
        (out_dir / f"fold-{outcome.fold}.report.json").write_bytes(
            dump_json_bytes(outcome.report.to_json_dict())
        )
        train_x = np.asarray([features[i] for i in outcome.train_ids])
        train_y = np.asarray([labels[i] for i in outcome.train_ids], dtype=int)
        _write_stats(out_dir / f"fold-{outcome.fold}.stats.json", params, train_x, train_y)
        if params.head == "ordinal":
            for flag in boundary_flags(params):
                print(f"warning: fold {outcome.fold}: {flag}", file=sys.stderr)
    print(f"cross-validation: {result.summary()}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    params = load_checkpoint(Path(args.checkpoint).read_bytes())
    piece = load_piece_file(args.piece, cache_dir=_cache_dir())
    level = predict_level(params, extract_features(piece))
    if args.format == "json":
        print(json.dumps({"id": piece.id, "predicted_level": level}))
    else:
        print(level)
    return EXIT_OK


def _cmd_explain(args) -> int:
    params = load_checkpoint(Path(args.checkpoint).read_bytes())
    stats_doc = json.loads(Path(args.stats).read_text())
    stats = analysis.GradeStatistics.from_json_dict(stats_doc)
    piece = load_piece_file(args.piece, cache_dir=_cache_dir())
    rubric = report.build_report(params, piece, stats)
    fmt = args.format or "markdown"
    if fmt == "csv":
        raise _UsageError("explain supports json, markdown, or html")
    rendered = report.render(rubric, fmt)
    if args.out:
        Path(args.out).write_bytes(rendered)
        print(f"wrote {fmt} report to {args.out}")
    else:
        sys.stdout.write(rendered.decode("utf-8"))
    return EXIT_OK


def _cmd_analyze(args) -> int:
    rows = read_feature_table(args.features)
    ids, labels, x = feature_matrix(rows)
    if labels is None:
        raise RubricnetError("analysis needs a label for every row of the feature table")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    table = analysis.feature_difficulty_table(x, labels)
    (out_dir / "correlation.csv").write_text(table.to_csv())
    plots.render_correlation_svg(table, out_dir / "correlation.svg")

    conditional = analysis.conditional_tau_matrix(x, labels)
    distances = analysis.correlation_to_distance(conditional)
    dendrogram = analysis.agglomerative_cluster(distances)
    (out_dir / "dendrogram.json").write_bytes(
        dump_json_bytes(dendrogram.to_json_dict(labels=list(FEATURE_COLUMNS)))
    )
    plots.render_dendrogram_svg(dendrogram, FEATURE_LABELS, out_dir / "dendrogram.svg")

    artifacts = ["correlation.csv", "correlation.svg", "dendrogram.json", "dendrogram.svg"]
    if args.checkpoint:
        params = load_checkpoint(Path(args.checkpoint).read_bytes())
        profile = analysis.grade_contributions([(params, x, labels)])
        (out_dir / "contributions.csv").write_text(profile.to_csv())
        plots.render_contributions_svg(profile, FEATURE_LABELS, out_dir / "contributions.svg")
        artifacts += ["contributions.csv", "contributions.svg"]
    else:
        print("no --checkpoint given; skipping the contribution profile", file=sys.stderr)
    print(f"wrote {', '.join(artifacts)} to {out_dir}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    if args.k < 2 or args.n_per_class < 1 or args.noise < 0:
        raise _UsageError("synth needs --k >= 2, --n-per-class >= 1, --noise >= 0")
    spec = synth.SynthSpec(
        k=args.k, n_per_class=args.n_per_class, seed=args.seed, mode="score_level",
        noise=args.noise,
    )
    corpus = synth.gen_score_corpus(spec)
    out_dir = Path(args.out_dir)
    scores_dir = out_dir / "scores"
    scores_dir.mkdir(parents=True, exist_ok=True)
    lines = ["id,level"]
    for piece in sorted(corpus.pieces, key=lambda p: p.id):
        (scores_dir / f"{piece.id}.json").write_bytes(serialize_canonical_json(piece))
        lines.append(f"{piece.id},{piece.label}")
    (out_dir / "labels.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(corpus.pieces)} scores and labels.csv to {out_dir}")
    return EXIT_OK


_COMMANDS = {
    "extract": _cmd_extract,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "explain": _cmd_explain,
    "analyze": _cmd_analyze,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.jobs < 1:
            raise _UsageError("--jobs must be >= 1")
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (RubricnetError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
