"""Offline benchmark harness: fabricate labeled schema pairs, score matches.

Pairs are fabricated from a single table by horizontal/vertical splitting
(unionable, view-unionable, joinable, semantically-joinable with name
noising), and matcher output is scored with per-pair F1 plus rank-based
AUC, macro-averaged across pairs.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ABLATION_FAMILIES, PipelineConfig
from .errors import DataError
from .gbdt import EnsembleModel, f1_from_counts
from .matcher import MatchResult, SchemaProfiler, match_schemas
from .name_features import tokenize_name
from .schema import Column, Schema, load_csv
from .util import derive_seed

REPORT_FORMAT_VERSION = 1

FABRICATION_MODES = ("unionable", "view_unionable", "joinable", "sem_joinable")
NOISE_OPS = ("synonym", "shuffle", "mask")

SYNONYM_LEXICON = {
    "id": "identifier",
    "name": "label",
    "title": "heading",
    "description": "summary",
    "desc": "summary",
    "price": "cost",
    "value": "amount",
    "count": "total",
    "rating": "score",
    "country": "nation",
    "city": "town",
    "state": "region",
    "email": "mail",
    "phone": "telephone",
    "url": "link",
    "homepage": "website",
    "date": "day",
    "year": "yr",
    "color": "colour",
    "views": "hits",
    "person": "individual",
    "record": "entry",
    "favorite": "preferred",
    "signup": "registration",
}


# --- gold mappings ------------------------------------------------------------

@dataclass(frozen=True)
class GoldEntry:
    left_name: str | None = None
    right_name: str | None = None
    left_index: int | None = None
    right_index: int | None = None


@dataclass(frozen=True)
class GoldMapping:
    entries: tuple[GoldEntry, ...]
    many_to_many: bool = False

    def __len__(self) -> int:
        return len(self.entries)


def _resolve_side(name: str | None, index: int | None, schema: Schema, side: str) -> int:
    if name is not None:
        hits = [i for i, n in enumerate(schema.column_names) if n == name]
        if len(hits) == 1:
            return hits[0]
        # ambiguous or absent name: fall back to the index
    if index is not None:
        if not (0 <= index < len(schema.columns)):
            raise DataError("%s column index %d out of range for %s" % (side, index, schema.name))
        return index
    raise DataError("gold entry cannot be resolved against %s (%r)" % (schema.name, name))


def resolve_gold(gold: GoldMapping, left: Schema, right: Schema) -> set[tuple[int, int]]:
    pairs = set()
    for entry in gold.entries:
        i = _resolve_side(entry.left_name, entry.left_index, left, "left")
        j = _resolve_side(entry.right_name, entry.right_index, right, "right")
        pairs.add((i, j))
    if not gold.many_to_many:
        lefts = [i for i, _ in pairs]
        rights = [j for _, j in pairs]
        if len(set(lefts)) != len(lefts) or len(set(rights)) != len(rights):
            raise DataError("duplicate columns in a one-to-one gold mapping for %s" % left.name)
    return pairs


def write_gold_jsonl(path, gold: GoldMapping) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in gold.entries:
            record = {
                "left_name": e.left_name,
                "right_name": e.right_name,
                "left_index": e.left_index,
                "right_index": e.right_index,
            }
            fh.write(json.dumps({k: v for k, v in record.items() if v is not None}) + "\n")


def load_gold_jsonl(path, many_to_many: bool = False) -> GoldMapping:
    entries = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError("bad JSON on line %d of %s: %s" % (line_no, path, exc)) from exc
                entries.append(
                    GoldEntry(
                        left_name=record.get("left_name"),
                        right_name=record.get("right_name"),
                        left_index=record.get("left_index"),
                        right_index=record.get("right_index"),
                    )
                )
    except OSError as exc:
        raise DataError("cannot read gold mapping %s: %s" % (path, exc)) from exc
    return GoldMapping(entries=tuple(entries), many_to_many=many_to_many)


# --- fabrication ---------------------------------------------------------------

@dataclass(frozen=True)
class FabricateParams:
    row_overlap_pct: float = 50.0
    col_overlap_pct: float = 50.0
    noise: float = 0.0
    typo_rate: float = 0.0
    noise_ops: tuple[str, ...] = NOISE_OPS

    def __post_init__(self):
        for pct in (self.row_overlap_pct, self.col_overlap_pct):
            if not (0.0 <= pct <= 100.0):
                raise DataError("overlap percentages must be within [0, 100]")
        for rate in (self.noise, self.typo_rate):
            if not (0.0 <= rate <= 1.0):
                raise DataError("noise rates must be within [0, 1]")
        unknown = set(self.noise_ops) - set(NOISE_OPS)
        if unknown:
            raise DataError("unknown noise ops %s" % sorted(unknown))


def _schema_rows(schema: Schema) -> list[tuple[str, ...]]:
    return list(zip(*[col.values for col in schema.columns]))


def _subtable(schema: Schema, name: str, row_idx: list[int], col_idx: list[int]) -> Schema:
    rows = _schema_rows(schema)
    return Schema(
        name=name,
        columns=tuple(
            Column(
                name=schema.columns[c].name,
                values=tuple(rows[r][c] for r in row_idx),
            )
            for c in col_idx
        ),
    )


def _split_rows(n: int, overlap_pct: float, rng: random.Random) -> tuple[list[int], list[int]]:
    idx = list(range(n))
    rng.shuffle(idx)
    shared_count = round(n * overlap_pct / 100.0)
    shared, rest = idx[:shared_count], idx[shared_count:]
    half = len(rest) // 2
    return sorted(shared + rest[:half]), sorted(shared + rest[half:])


def _split_cols(n: int, overlap_pct: float, rng: random.Random, min_shared: int = 0):
    idx = list(range(n))
    rng.shuffle(idx)
    shared_count = max(min_shared, round(n * overlap_pct / 100.0))
    if shared_count > n:
        raise DataError("column overlap requires more columns than the table has")
    shared, rest = idx[:shared_count], idx[shared_count:]
    half = len(rest) // 2
    return sorted(shared), sorted(shared + rest[:half]), sorted(shared + rest[half:])


def _inject_typos(values: tuple[str, ...], rate: float, rng: random.Random) -> tuple[str, ...]:
    out = []
    for v in values:
        if len(v) >= 2 and rng.random() < rate:
            pos = rng.randrange(len(v) - 1)
            if rng.random() < 0.5:
                v = v[:pos] + v[pos + 1] + v[pos] + v[pos + 2 :]  # swap adjacent
            else:
                v = v[:pos] + v[pos + 1 :]  # drop one character
        out.append(v)
    return tuple(out)


def _noise_name(name: str, position: int, ops: tuple[str, ...], rng: random.Random) -> str:
    tokens = tokenize_name(name)
    applicable = []
    if "synonym" in ops and any(t in SYNONYM_LEXICON for t in tokens):
        applicable.append("synonym")
    if "shuffle" in ops and len(tokens) >= 2:
        applicable.append("shuffle")
    if "mask" in ops:
        applicable.append("mask")
    if not applicable:
        return name
    op = rng.choice(applicable)
    if op == "synonym":
        return "_".join(SYNONYM_LEXICON.get(t, t) for t in tokens)
    if op == "shuffle":
        shuffled = tokens[:]
        rng.shuffle(shuffled)
        if shuffled == tokens:  # force a visible change
            shuffled = tokens[1:] + tokens[:1]
        return "_".join(shuffled)
    return "col%d" % position


def fabricate(
    table: Schema,
    mode: str,
    params: FabricateParams = FabricateParams(),
    seed: int = 0,
) -> tuple[Schema, Schema, GoldMapping]:
    """Split one table into a labeled left/right pair.

    unionable: horizontal split with the requested row overlap, all columns
    on both sides, identity gold. view_unionable: disjoint rows plus a
    vertical split with the requested column overlap. joinable: vertical
    split sharing at least one column and the requested row overlap.
    sem_joinable: joinable with seeded name noising (and optional cell
    typos) applied to the right side's columns.
    """
    if mode not in FABRICATION_MODES:
        raise DataError("unknown fabrication mode %r; options: %s" % (mode, ", ".join(FABRICATION_MODES)))
    n_rows = len(table.columns[0].values)
    n_cols = len(table.columns)
    if n_cols < 4 or n_rows < 20:
        raise DataError(
            "fabrication needs >= 4 columns and >= 20 rows; %s has %d x %d"
            % (table.name, n_cols, n_rows)
        )
    rng = random.Random(derive_seed(seed, "fabricate", mode))

    if mode == "unionable":
        left_rows, right_rows = _split_rows(n_rows, params.row_overlap_pct, rng)
        all_cols = list(range(n_cols))
        left = _subtable(table, table.name + ".left", left_rows, all_cols)
        right = _subtable(table, table.name + ".right", right_rows, all_cols)
        gold = GoldMapping(
            entries=tuple(
                GoldEntry(
                    left_name=table.columns[c].name,
                    right_name=table.columns[c].name,
                    left_index=c,
                    right_index=c,
                )
                for c in all_cols
            )
        )
    elif mode == "view_unionable":
        left_rows, right_rows = _split_rows(n_rows, 0.0, rng)
        shared, left_cols, right_cols = _split_cols(n_cols, params.col_overlap_pct, rng)
        left = _subtable(table, table.name + ".left", left_rows, left_cols)
        right = _subtable(table, table.name + ".right", right_rows, right_cols)
        gold = _identity_gold(table, shared, left_cols, right_cols)
    else:  # joinable / sem_joinable
        left_rows, right_rows = _split_rows(n_rows, params.row_overlap_pct, rng)
        shared, left_cols, right_cols = _split_cols(n_cols, params.col_overlap_pct, rng, min_shared=1)
        left = _subtable(table, table.name + ".left", left_rows, left_cols)
        right = _subtable(table, table.name + ".right", right_rows, right_cols)
        gold = _identity_gold(table, shared, left_cols, right_cols)

    if mode == "sem_joinable":
        right, gold = _noise_right_side(right, gold, params, rng)
    if params.typo_rate > 0.0:
        right = Schema(
            name=right.name,
            columns=tuple(
                Column(c.name, _inject_typos(c.values, params.typo_rate, rng))
                for c in right.columns
            ),
        )
    return left, right, gold


def _identity_gold(table, shared_cols, left_cols, right_cols) -> GoldMapping:
    entries = []
    for c in shared_cols:
        entries.append(
            GoldEntry(
                left_name=table.columns[c].name,
                right_name=table.columns[c].name,
                left_index=left_cols.index(c),
                right_index=right_cols.index(c),
            )
        )
    return GoldMapping(entries=tuple(entries))


def _noise_right_side(right: Schema, gold: GoldMapping, params: FabricateParams, rng: random.Random):
    new_columns = list(right.columns)
    renames: dict[int, str] = {}
    gold_right_positions = {e.right_index for e in gold.entries}
    for pos, col in enumerate(right.columns):
        if pos in gold_right_positions and rng.random() < params.noise:
            new_name = _noise_name(col.name, pos, params.noise_ops, rng)
            renames[pos] = new_name
            new_columns[pos] = Column(new_name, col.values)
    new_entries = tuple(
        replace(e, right_name=renames.get(e.right_index, e.right_name)) for e in gold.entries
    )
    return Schema(right.name, tuple(new_columns)), GoldMapping(entries=new_entries)


# --- evaluation ----------------------------------------------------------------

def mann_whitney_auc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Rank-based AUC with midranks for ties; None when one class is absent."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0  # 1-based midrank
        i = j + 1
    rank_sum_pos = float(ranks[labels].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class PairEval:
    left: str
    right: str
    f1: float
    auc: float | None
    tp: int
    fp: int
    fn: int
    n_gold: int
    n_predicted: int

    def to_dict(self) -> dict:
        return {
            "left": self.left,
            "right": self.right,
            "f1": self.f1,
            "auc": self.auc,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "n_gold": self.n_gold,
            "n_predicted": self.n_predicted,
        }


def evaluate_pair(result: MatchResult, gold_pairs: set[tuple[int, int]]) -> PairEval:
    """Set-overlap F1 of predicted pairs, plus AUC over the full score grid.

    AUC is undefined (None) when the gold set is empty or covers the whole
    grid; F1 with empty gold is 1 exactly when nothing was predicted.
    """
    n1, n2 = result.score_matrix.shape
    for i, j in gold_pairs:
        if not (0 <= i < n1 and 0 <= j < n2):
            raise DataError("gold pair (%d, %d) outside the %dx%d grid" % (i, j, n1, n2))
    predicted = {(i, j) for i, j, _ in result.pairs}
    tp = len(predicted & gold_pairs)
    fp = len(predicted - gold_pairs)
    fn = len(gold_pairs - predicted)
    if not gold_pairs:
        f1 = 1.0 if not predicted else 0.0
    else:
        f1 = f1_from_counts(tp, fp, fn)
    labels = np.zeros((n1, n2), dtype=bool)
    for i, j in gold_pairs:
        labels[i, j] = True
    auc = mann_whitney_auc(result.score_matrix, labels)
    return PairEval(
        left=result.left_schema,
        right=result.right_schema,
        f1=f1,
        auc=auc,
        tp=tp,
        fp=fp,
        fn=fn,
        n_gold=len(gold_pairs),
        n_predicted=len(predicted),
    )


# --- dataset manifests -----------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    left: str
    right: str
    gold: str
    many_to_many: bool = False


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        base = Path(path).parent
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise DataError("cannot read manifest %s: %s" % (path, exc)) from exc
        except json.JSONDecodeError as exc:
            raise DataError("manifest %s is not valid JSON: %s" % (path, exc)) from exc
        raw_entries = data.get("entries")
        if not isinstance(raw_entries, list) or not raw_entries:
            raise DataError("manifest %s must contain a non-empty 'entries' list" % path)
        entries = []
        for k, raw in enumerate(raw_entries):
            try:
                entry = ManifestEntry(
                    left=str(base / raw["left"]),
                    right=str(base / raw["right"]),
                    gold=str(base / raw["gold"]),
                    many_to_many=bool(raw.get("many_to_many", False)),
                )
            except (KeyError, TypeError) as exc:
                raise DataError("manifest %s entry %d is malformed: %s" % (path, k, exc)) from exc
            for p in (entry.left, entry.right, entry.gold):
                if not Path(p).is_file():
                    raise DataError("manifest %s references missing file %s" % (path, p))
            entries.append(entry)
        return cls(entries=tuple(entries))


@dataclass
class EvalReport:
    entries: list[PairEval]
    macro_f1: float
    macro_auc: float | None
    auc_skipped: int
    failures: list[dict]
    partial: bool
    provenance: dict
    results: list[MatchResult] | None = None  # retained only for report rendering

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "entries": [e.to_dict() for e in self.entries],
            "macro_f1": self.macro_f1,
            "macro_auc": self.macro_auc,
            "auc_skipped": self.auc_skipped,
            "failures": self.failures,
            "partial": self.partial,
            "provenance": self.provenance,
        }


def _mean(values) -> float:
    return math.fsum(values) / len(values)  # fsum: order-independent exactly


def evaluate_dataset(
    manifest: DatasetManifest,
    ensemble: EnsembleModel,
    config: PipelineConfig,
    profiler: SchemaProfiler | None = None,
    keep_results: bool = False,
) -> EvalReport:
    """Match and score every manifest entry; macro-average the per-pair metrics.

    Entries that fail to evaluate are excluded and reported; the run is then
    flagged partial.
    """
    if profiler is None:
        profiler = SchemaProfiler(config)
    evals: list[PairEval] = []
    failures: list[dict] = []
    results: list[MatchResult] = []
    row_seed = derive_seed(config.seed, "rows")
    for entry in manifest.entries:
        try:
            left = load_csv(entry.left, config.row_cap, row_seed)
            right = load_csv(entry.right, config.row_cap, row_seed)
            gold = load_gold_jsonl(entry.gold, many_to_many=entry.many_to_many)
            entry_config = (
                replace(config, no_assignment=True) if entry.many_to_many else config
            )
            result = match_schemas(left, right, ensemble, entry_config, profiler)
            evals.append(evaluate_pair(result, resolve_gold(gold, left, right)))
            if keep_results:
                results.append(result)
        except DataError as exc:
            failures.append({"left": entry.left, "right": entry.right, "error": str(exc)})
    if not evals:
        raise DataError("no manifest entry could be evaluated")
    aucs = [e.auc for e in evals if e.auc is not None]
    provenance = dict(config.snapshot())
    provenance["model_hash"] = ensemble.model_hash
    provenance["feature_schema_hash"] = ensemble.feature_schema.hash
    return EvalReport(
        entries=evals,
        macro_f1=_mean([e.f1 for e in evals]),
        macro_auc=_mean(aucs) if aucs else None,
        auc_skipped=len(evals) - len(aucs),
        failures=failures,
        partial=bool(failures),
        provenance=provenance,
        results=results if keep_results else None,
    )


def build_training_set(labeled_pairs, config: PipelineConfig, profiler: SchemaProfiler | None = None):
    """Stack pair features and binary labels from (left, right, gold-set) triples."""
    from .gbdt import FeatureMatrix
    from .matcher import pair_feature_matrix

    if profiler is None:
        profiler = SchemaProfiler(config)
    blocks = []
    labels = []
    for left, right, gold_pairs in labeled_pairs:
        lp = profiler.profile(left)
        rp = profiler.profile(right)
        X = pair_feature_matrix(lp, rp, config.epsilon, config.drops)
        blocks.append(X)
        labels.extend(
            1.0 if (i, j) in gold_pairs else 0.0
            for i in range(len(lp))
            for j in range(len(rp))
        )
    values = np.concatenate([b.values for b in blocks])
    missing = np.concatenate([b.missing for b in blocks])
    return FeatureMatrix(values, missing), np.asarray(labels, dtype=np.float64)


def training_set_from_manifest(
    manifest: DatasetManifest, config: PipelineConfig, profiler: SchemaProfiler | None = None
):
    """Load every manifest entry and assemble the labeled pair-feature matrix."""
    row_seed = derive_seed(config.seed, "rows")
    triples = []
    for entry in manifest.entries:
        left = load_csv(entry.left, config.row_cap, row_seed)
        right = load_csv(entry.right, config.row_cap, row_seed)
        gold = load_gold_jsonl(entry.gold, many_to_many=entry.many_to_many)
        triples.append((left, right, resolve_gold(gold, left, right)))
    return build_training_set(triples, config, profiler)


def ablate(config: PipelineConfig, drop) -> PipelineConfig:
    """Config with the named feature families masked out of the hybrid vector."""
    drop = tuple(drop)
    unknown = set(drop) - set(ABLATION_FAMILIES)
    if unknown:
        raise DataError("unknown ablation families %s" % sorted(unknown))
    return config.with_drops(tuple(config.drops) + drop)
