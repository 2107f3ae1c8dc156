"""Command-line interface: tag, features, train, match, eval, fabricate, ablate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider/transport
error. Logs go to stderr; results go to files or stdout as JSON.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from importlib import metadata
from pathlib import Path

from . import bench
from .bench import (
    DatasetManifest,
    FabricateParams,
    evaluate_dataset,
    fabricate,
    training_set_from_manifest,
    write_gold_jsonl,
)
from .config import ABLATION_FAMILIES, PipelineConfig
from .embedding import EmbeddingProviderConfig
from .errors import DataError, ProviderError, SmutfError
from .gbdt import (
    EnsembleModel,
    MODEL_FORMAT_VERSION,
    fast_grid,
    full_grid,
    train_ensemble,
)
from .matcher import (
    RESULT_FORMAT_VERSION,
    SchemaProfiler,
    hybrid_feature_schema,
    hybrid_features,
    match_schemas,
)
from .schema import load_csv
from .tagging import LlmTaggerConfig
from .util import derive_seed, stable_json_dumps

logger = logging.getLogger("smutf")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1
        raise UsageError(message)


def _package_version() -> str:
    try:
        return metadata.version("smutf")
    except metadata.PackageNotFoundError:
        return "unknown"


def build_parser() -> _Parser:
    parser = _Parser(prog="smutf", description="Schema matching for tabular data")
    parser.add_argument(
        "--version",
        action="version",
        version="smutf %s (model format %d, result format %d)"
        % (_package_version(), MODEL_FORMAT_VERSION, RESULT_FORMAT_VERSION),
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its keys")
    common.add_argument("--seed", type=int, help="top-level random seed (default 7)")
    common.add_argument("--rows", type=int, help="row cap per table (default 100)")
    common.add_argument("--embedder", choices=("hashed", "remote"), help="embedding provider")
    common.add_argument("--embed-dim", type=int, help="hashed-ngram dimension (default 256)")
    common.add_argument("--embed-endpoint", help="remote embedding endpoint URL")
    common.add_argument("--embed-model", help="remote embedding model name")
    common.add_argument("--tagger", choices=("rule", "llm"), help="column tagger (default rule)")
    common.add_argument("--endpoint", help="chat-completion endpoint for --tagger llm")
    common.add_argument("--epsilon", type=float, help="denominator guard for value diffs")
    common.add_argument(
        "--drop",
        action="append",
        metavar="FAMILY",
        help="ablate a feature family (repeatable); families: %s" % ", ".join(ABLATION_FAMILIES),
    )
    common.add_argument("--jobs", type=int, help="worker parallelism (default: cores)")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", required=True)

    p_tag = sub.add_parser("tag", parents=[common], help="tag every column of one table")
    p_tag.add_argument("--input", required=True, help="CSV table")
    p_tag.add_argument("--out", help="output JSON path (default stdout)")

    p_feat = sub.add_parser("features", parents=[common], help="dump per-pair feature vectors")
    p_feat.add_argument("--left", required=True)
    p_feat.add_argument("--right", required=True)
    p_feat.add_argument("--out", required=True, help="JSONL output path")

    p_train = sub.add_parser("train", parents=[common], help="train the 16-model ensemble")
    p_train.add_argument("--pairs", required=True, help="training manifest JSON")
    p_train.add_argument("--out", required=True, help="model JSON output path")
    p_train.add_argument("--grid", choices=("full", "fast"), help="hyperparameter grid")
    p_train.add_argument("--budget", type=int, help="seeded subsample of the grid")

    p_match = sub.add_parser("match", parents=[common], help="match two tables")
    p_match.add_argument("--left", required=True)
    p_match.add_argument("--right", required=True)
    p_match.add_argument("--model", required=True)
    p_match.add_argument("--threshold", type=float, help="score threshold replacing member votes")
    p_match.add_argument("--no-assignment", action="store_true",
                         help="emit all decision-positive pairs (many-to-many)")
    p_match.add_argument("--out", help="result JSON path (default stdout)")
    p_match.add_argument("--heatmap", help="also render a score heatmap PNG here")

    p_eval = sub.add_parser("eval", parents=[common], help="evaluate a model on a benchmark")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--threshold", type=float, help="score threshold replacing member votes")
    p_eval.add_argument("--out", help="report JSON path (default stdout)")
    p_eval.add_argument("--report-dir", help="directory for CSV metrics and figures")

    p_fab = sub.add_parser("fabricate", parents=[common], help="split a table into a labeled pair")
    p_fab.add_argument("--input", required=True, help="source CSV table")
    p_fab.add_argument("--mode", required=True, choices=bench.FABRICATION_MODES)
    p_fab.add_argument("--row-overlap", type=float, default=50.0, help="shared-row percentage")
    p_fab.add_argument("--col-overlap", type=float, default=50.0, help="shared-column percentage")
    p_fab.add_argument("--noise", type=float, default=0.5,
                       help="per-column name-noising probability (sem_joinable)")
    p_fab.add_argument("--typo-rate", type=float, default=0.0, help="cell typo-injection rate")
    p_fab.add_argument("--noise-ops", default=",".join(bench.NOISE_OPS),
                       help="comma list from {%s}" % ",".join(bench.NOISE_OPS))
    p_fab.add_argument("--out-dir", required=True)

    p_abl = sub.add_parser("ablate", parents=[common],
                           help="train and evaluate feature-family ablations")
    p_abl.add_argument("--train-manifest", required=True)
    p_abl.add_argument("--eval-manifest", required=True)
    p_abl.add_argument("--families", help="comma list (default: every family, one at a time)")
    p_abl.add_argument("--grid", choices=("full", "fast"), help="hyperparameter grid")
    p_abl.add_argument("--budget", type=int, help="seeded subsample of the grid")
    p_abl.add_argument("--out", help="comparison JSON path (default stdout)")
    p_abl.add_argument("--report-dir", help="directory for the comparison figure")

    return parser


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataError("cannot read config file %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise DataError("config file %s is not valid JSON: %s" % (path, exc)) from exc
    if not isinstance(data, dict):
        raise DataError("config file %s must hold a JSON object" % path)
    return data


def _pick(args, file_config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in file_config:
        return file_config[key]
    return default


def make_config(args) -> PipelineConfig:
    file_config = _load_config_file(args.config) if getattr(args, "config", None) else {}
    embedder_kind = _pick(args, file_config, "embedder", "hashed")
    if embedder_kind == "remote":
        endpoint = _pick(args, file_config, "embed_endpoint", "")
        embedder = EmbeddingProviderConfig(
            kind="remote",
            endpoint_url=endpoint,
            model_name=_pick(args, file_config, "embed_model", "text-embedding"),
        )
    else:
        embedder = EmbeddingProviderConfig(
            kind="hashed_ngram", dim=int(_pick(args, file_config, "embed_dim", 256))
        )
    tagger = _pick(args, file_config, "tagger", "rule")
    llm = None
    if tagger == "llm":
        endpoint = _pick(args, file_config, "endpoint", "")
        if not endpoint:
            raise UsageError("--tagger llm requires --endpoint")
        llm = LlmTaggerConfig(endpoint_url=endpoint)
    drops = getattr(args, "drop", None) or file_config.get("drop") or ()
    return PipelineConfig(
        seed=int(_pick(args, file_config, "seed", 7)),
        row_cap=int(_pick(args, file_config, "rows", 100)),
        embedder=embedder,
        tagger=tagger,
        llm=llm,
        epsilon=float(_pick(args, file_config, "epsilon", 1e-9)),
        grid_mode=_pick(args, file_config, "grid", "full"),
        budget=_pick(args, file_config, "budget", None),
        threshold=getattr(args, "threshold", None),
        drops=tuple(sorted(set(drops))),
        no_assignment=bool(getattr(args, "no_assignment", False)),
        jobs=int(_pick(args, file_config, "jobs", 0)),
    )


def _emit(text: str, out_path) -> None:
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def load_model(path) -> EnsembleModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataError("cannot read model %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise DataError("model %s is not valid JSON: %s" % (path, exc)) from exc
    return EnsembleModel.from_dict(data)


def _grid_for(config: PipelineConfig):
    return fast_grid() if config.grid_mode == "fast" else full_grid()


def cmd_tag(args) -> int:
    config = make_config(args)
    schema = load_csv(args.input, config.row_cap, derive_seed(config.seed, "rows"))
    profiler = SchemaProfiler(config)
    profiles = profiler.profile(schema)
    tags = {p.name: p.tag.render() for p in profiles}
    _emit(stable_json_dumps(tags), args.out)
    return EXIT_OK


def cmd_features(args) -> int:
    config = make_config(args)
    row_seed = derive_seed(config.seed, "rows")
    left = load_csv(args.left, config.row_cap, row_seed)
    right = load_csv(args.right, config.row_cap, row_seed)
    profiler = SchemaProfiler(config)
    lp, rp = profiler.profile(left), profiler.profile(right)
    with open(args.out, "w", encoding="utf-8") as fh:
        for pa in lp:
            for pb in rp:
                feat = hybrid_features(pa, pb, eps=config.epsilon, drops=config.drops)
                named = feat.as_dict()
                record = {
                    "left_col": pa.index,
                    "right_col": pb.index,
                    "left_name": pa.name,
                    "right_name": pb.name,
                    "name": {
                        "cos_name": named["name_cos"],
                        "bleu": named["name_bleu"],
                        "edit_sim": named["name_edit"],
                        "lcs_ratio": named["name_lcs"],
                        "one_in_one": named["name_one_in_one"],
                    },
                    "value_diff": {
                        k[len("vdiff_"):]: v for k, v in named.items() if k.startswith("vdiff_")
                    },
                    "cos_value": named["value_cos"],
                    "tag_match": {
                        "exact_hashtag": named["tag_hashtag_exact"],
                        "attr_jaccard": named["tag_attr_jaccard"],
                    },
                }
                fh.write(stable_json_dumps(record) + "\n")
    logger.info("wrote %d pair feature rows to %s", len(lp) * len(rp), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    config = make_config(args)
    manifest = DatasetManifest.load(args.pairs)
    profiler = SchemaProfiler(config)
    X, y = training_set_from_manifest(manifest, config, profiler)
    logger.info("training on %d pairs (%d positive)", y.size, int(y.sum()))
    ensemble = train_ensemble(
        X,
        y,
        grid=_grid_for(config),
        seed=config.seed,
        feature_schema=hybrid_feature_schema(config.drops),
        budget=config.budget,
        jobs=config.effective_jobs,
    )
    Path(args.out).write_text(ensemble.to_json() + "\n", encoding="utf-8")
    logger.info("model written to %s (hash %s)", args.out, ensemble.model_hash[:12])
    return EXIT_OK


def cmd_match(args) -> int:
    config = make_config(args)
    row_seed = derive_seed(config.seed, "rows")
    left = load_csv(args.left, config.row_cap, row_seed)
    right = load_csv(args.right, config.row_cap, row_seed)
    ensemble = load_model(args.model)
    result = match_schemas(left, right, ensemble, config)
    _emit(result.to_json(), args.out)
    if args.heatmap:
        from .report import render_score_heatmap

        render_score_heatmap(result, args.heatmap)
    return EXIT_OK


def cmd_eval(args) -> int:
    config = make_config(args)
    manifest = DatasetManifest.load(args.manifest)
    ensemble = load_model(args.model)
    report = evaluate_dataset(
        manifest, ensemble, config, keep_results=bool(args.report_dir)
    )
    _emit(stable_json_dumps(report.to_dict()), args.out)
    if args.report_dir:
        from .report import render_eval_report

        written = render_eval_report(report, args.report_dir)
        logger.info("report artifacts: %s", ", ".join(str(p) for p in written))
    return EXIT_OK


def _write_schema_csv(schema, path) -> None:
    rows = list(zip(*[c.values for c in schema.columns]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in schema.columns])
        writer.writerows(rows)


def cmd_fabricate(args) -> int:
    config = make_config(args)
    table = load_csv(args.input, config.row_cap, derive_seed(config.seed, "rows"))
    params = FabricateParams(
        row_overlap_pct=args.row_overlap,
        col_overlap_pct=args.col_overlap,
        noise=args.noise,
        typo_rate=args.typo_rate,
        noise_ops=tuple(op for op in args.noise_ops.split(",") if op),
    )
    left, right, gold = fabricate(table, args.mode, params, seed=derive_seed(config.seed, "fabricate"))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    left_path = out_dir / ("%s_%s_left.csv" % (stem, args.mode))
    right_path = out_dir / ("%s_%s_right.csv" % (stem, args.mode))
    gold_path = out_dir / ("%s_%s_gold.jsonl" % (stem, args.mode))
    _write_schema_csv(left, left_path)
    _write_schema_csv(right, right_path)
    write_gold_jsonl(gold_path, gold)
    manifest = {
        "entries": [
            {"left": left_path.name, "right": right_path.name, "gold": gold_path.name}
        ]
    }
    (out_dir / ("%s_%s_manifest.json" % (stem, args.mode))).write_text(
        stable_json_dumps(manifest) + "\n", encoding="utf-8"
    )
    logger.info("fabricated %s pair in %s (%d gold pairs)", args.mode, out_dir, len(gold))
    return EXIT_OK


def cmd_ablate(args) -> int:
    config = make_config(args)
    train_manifest = DatasetManifest.load(args.train_manifest)
    eval_manifest = DatasetManifest.load(args.eval_manifest)
    if args.families:
        family_sets = [
            tuple(f for f in spec.split("+") if f) for spec in args.families.split(",")
        ]
    else:
        family_sets = [(fam,) for fam in ABLATION_FAMILIES]

    rows = []

    def run_config(label: str, cfg: PipelineConfig):
        profiler = SchemaProfiler(cfg)
        X, y = training_set_from_manifest(train_manifest, cfg, profiler)
        ensemble = train_ensemble(
            X,
            y,
            grid=_grid_for(cfg),
            seed=cfg.seed,
            feature_schema=hybrid_feature_schema(cfg.drops),
            budget=cfg.budget,
            jobs=cfg.effective_jobs,
        )
        report = evaluate_dataset(eval_manifest, ensemble, cfg, profiler)
        rows.append(
            {
                "label": label,
                "drops": sorted(cfg.drops),
                "macro_f1": report.macro_f1,
                "macro_auc": report.macro_auc,
            }
        )
        logger.info("%s: macro-F1 %.4f macro-AUC %s", label, report.macro_f1,
                    "n/a" if report.macro_auc is None else "%.4f" % report.macro_auc)

    run_config("full", config)
    for families in family_sets:
        run_config("w/o " + "+".join(families), bench.ablate(config, families))

    payload = {"config": config.snapshot(), "rows": rows}
    _emit(stable_json_dumps(payload), args.out)
    if args.report_dir:
        from .report import render_ablation_chart

        out_dir = Path(args.report_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        render_ablation_chart(rows, out_dir / "ablations.png")
    return EXIT_OK


_COMMANDS = {
    "tag": cmd_tag,
    "features": cmd_features,
    "train": cmd_train,
    "match": cmd_match,
    "eval": cmd_eval,
    "fabricate": cmd_fabricate,
    "ablate": cmd_ablate,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            stream=sys.stderr,
            level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except ProviderError as exc:
        print("provider error: %s" % exc, file=sys.stderr)
        return EXIT_PROVIDER
    except DataError as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except SmutfError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
