"""Column profiling, hybrid pair features, and schema-to-schema matching.

Every cross pair of columns gets a 34-slot feature vector: five name
similarities, 26 normalized value-feature differences, the value-embedding
cosine, and the two tag-match components. The trained ensemble scores the
full grid; matched pairs are selected greedily one-to-one from the
decision-positive candidates (or all of them in many-to-many mode).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import ABLATION_FAMILIES, PipelineConfig
from .embedding import cosine, make_provider
from .errors import DataError, SchemaVersionError
from .gbdt import EnsembleModel, FeatureMatrix, FeatureSchema
from .name_features import (
    NAME_FEATURE_NAMES,
    bleu_score,
    edit_similarity,
    lcs_ratio,
    one_in_one,
)
from .schema import Column, DataTypeLabel, Schema, detect_column_type
from .tagging import HxlTag, LlmTagger, TagMatchScore, rule_tag, tag_match
from .util import derive_seed, sha256_hex, stable_json_dumps
from .value_features import (
    VALUE_FEATURE_NAMES,
    ColumnValueFeatures,
    column_value_features,
    normalized_abs_diff,
    value_embedding,
)

RESULT_FORMAT_VERSION = 1

HYBRID_FEATURE_NAMES: tuple[str, ...] = (
    NAME_FEATURE_NAMES
    + tuple("vdiff_%s" % n for n in VALUE_FEATURE_NAMES)
    + ("value_cos",)
    + ("tag_hashtag_exact", "tag_attr_jaccard")
)

_FAMILY_FEATURES = {
    "name_rule": ("name_bleu", "name_edit", "name_lcs", "name_one_in_one"),
    "name_embedding": ("name_cos",),
    "data_type": tuple("vdiff_type_%s" % t for t in ("url", "numeric", "date", "string")),
    "length": (
        "vdiff_length_mean",
        "vdiff_length_min",
        "vdiff_length_max",
        "vdiff_length_variance",
        "vdiff_length_cv",
        "vdiff_unique_length_ratio",
    ),
    "numerical": (
        "vdiff_numeric_mean",
        "vdiff_numeric_min",
        "vdiff_numeric_max",
        "vdiff_numeric_variance",
        "vdiff_numeric_cv",
        "vdiff_numeric_unique_ratio",
        "vdiff_numeric_present",
    ),
    "character": (
        "vdiff_whitespace_ratio_mean",
        "vdiff_whitespace_ratio_cv",
        "vdiff_punctuation_ratio_mean",
        "vdiff_punctuation_ratio_cv",
        "vdiff_special_ratio_mean",
        "vdiff_special_ratio_cv",
        "vdiff_numeric_ratio_mean",
        "vdiff_numeric_ratio_cv",
        "vdiff_text_present",
    ),
    "value_embedding": ("value_cos",),
    "tag": ("tag_hashtag_exact", "tag_attr_jaccard"),
}

assert set(ABLATION_FAMILIES) == set(_FAMILY_FEATURES)
assert sorted(n for fam in _FAMILY_FEATURES.values() for n in fam) == sorted(HYBRID_FEATURE_NAMES)


def hybrid_feature_schema(drops: tuple[str, ...] = ()) -> FeatureSchema:
    return FeatureSchema(names=HYBRID_FEATURE_NAMES, drops=tuple(sorted(drops)))


def _drop_mask(drops) -> np.ndarray:
    dropped_names = {n for fam in drops for n in _FAMILY_FEATURES[fam]}
    return np.array([n in dropped_names for n in HYBRID_FEATURE_NAMES], dtype=bool)


@dataclass(frozen=True)
class ColumnProfile:
    index: int
    name: str
    type_label: DataTypeLabel
    value_features: ColumnValueFeatures
    name_embedding: np.ndarray
    value_embedding: np.ndarray
    tag: HxlTag
    tag_provenance: str
    schema_hash: str


def schema_content_hash(schema: Schema) -> str:
    payload = stable_json_dumps(
        [[col.name, list(col.values)] for col in schema.columns]
    )
    return sha256_hex(payload)


class SchemaProfiler:
    """Computes per-column profiles; caches them by schema content hash."""

    def __init__(self, config: PipelineConfig, provider=None, tagger=None):
        self.config = config
        self.provider = provider if provider is not None else make_provider(config.embedder)
        if tagger is not None:
            self._llm_tagger = tagger
        elif config.tagger == "llm":
            self._llm_tagger = LlmTagger(config.llm, sample_seed=derive_seed(config.seed, "tag-sample"))
        else:
            self._llm_tagger = None
        self.feature_schema = hybrid_feature_schema(config.drops)
        self._cache: dict[str, list[ColumnProfile]] = {}
        self._lock = threading.Lock()

    def _tag_column(self, col: Column, type_label: DataTypeLabel) -> tuple[HxlTag, str]:
        if self._llm_tagger is not None:
            result = self._llm_tagger.tag_column(col, type_label)
            return result.tag, result.provenance
        return rule_tag(col, type_label), "rule"

    def profile(self, schema: Schema) -> list[ColumnProfile]:
        key = schema_content_hash(schema)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached

        seed = self.config.seed
        types = [detect_column_type(col) for col in schema.columns]
        # name embeddings first: they pin a remote provider's dimension
        name_vecs = [self.provider.embed(col.name) for col in schema.columns]

        if self._llm_tagger is not None and len(schema.columns) > 1:
            workers = min(self.config.llm.parallelism, len(schema.columns))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                tags = list(pool.map(self._tag_column, schema.columns, types))
        else:
            tags = [self._tag_column(col, t) for col, t in zip(schema.columns, types)]

        profiles = []
        for i, col in enumerate(schema.columns):
            profiles.append(
                ColumnProfile(
                    index=i,
                    name=col.name,
                    type_label=types[i],
                    value_features=column_value_features(col, types[i]),
                    name_embedding=name_vecs[i],
                    value_embedding=value_embedding(
                        self.provider, col, derive_seed(seed, "values", str(i)), types[i]
                    ),
                    tag=tags[i][0],
                    tag_provenance=tags[i][1],
                    schema_hash=self.feature_schema.hash,
                )
            )
        with self._lock:
            self._cache[key] = profiles
        return profiles


def _value_cosine(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:  # zero sentinels may differ in dim; cosine is 0 anyway
        if not a.any() or not b.any():
            return 0.0
        raise DataError("value embedding dimensions differ: %s vs %s" % (a.shape, b.shape))
    return cosine(a, b)


@dataclass(frozen=True)
class HybridFeature:
    values: np.ndarray
    missing: np.ndarray
    schema_hash: str

    def as_dict(self) -> dict:
        return dict(zip(HYBRID_FEATURE_NAMES, self.values.tolist()))


def hybrid_features(
    pa: ColumnProfile,
    pb: ColumnProfile,
    eps: float = 1e-9,
    drops: tuple[str, ...] = (),
) -> HybridFeature:
    """Assemble the pair feature vector [name block; value diffs; value cosine; tag block].

    Dropped families are zeroed and flagged missing so tree default
    directions apply. Symmetric under argument swap, exactly.
    """
    if pa.schema_hash != pb.schema_hash:
        raise SchemaVersionError("profiles built under different feature schemas")
    name_block = np.array(
        [
            cosine(pa.name_embedding, pb.name_embedding),
            bleu_score(pa.name, pb.name),
            edit_similarity(pa.name, pb.name),
            lcs_ratio(pa.name, pb.name),
            one_in_one(pa.name, pb.name),
        ],
        dtype=np.float64,
    )
    lv = normalized_abs_diff(pa.value_features.as_array(), pb.value_features.as_array(), eps)
    cos_value = _value_cosine(pa.value_embedding, pb.value_embedding)
    h: TagMatchScore = tag_match(pa.tag, pb.tag)
    values = np.concatenate(
        [name_block, lv, [cos_value], [float(h.exact_hashtag), h.attr_jaccard]]
    )
    missing = _drop_mask(drops)
    values = np.where(missing, 0.0, values)
    schema = hybrid_feature_schema(drops)
    if schema.hash != pa.schema_hash:
        raise SchemaVersionError("drops differ from the profiles' feature schema")
    return HybridFeature(values=values, missing=missing, schema_hash=schema.hash)


def pair_feature_matrix(
    left: list[ColumnProfile],
    right: list[ColumnProfile],
    eps: float,
    drops: tuple[str, ...],
) -> FeatureMatrix:
    rows = []
    for pa in left:
        for pb in right:
            rows.append(hybrid_features(pa, pb, eps=eps, drops=drops).values)
    missing = np.tile(_drop_mask(drops), (len(rows), 1))
    return FeatureMatrix(np.asarray(rows), missing)


@dataclass
class MatchResult:
    left_schema: str
    right_schema: str
    left_names: list[str]
    right_names: list[str]
    score_matrix: np.ndarray
    decision_matrix: np.ndarray
    pairs: list[tuple[int, int, float]]
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "format_version": RESULT_FORMAT_VERSION,
            "left_schema": self.left_schema,
            "right_schema": self.right_schema,
            "score_matrix": [[float(v) for v in row] for row in self.score_matrix],
            "pairs": [
                {
                    "left_col": i,
                    "right_col": j,
                    "left_name": self.left_names[i],
                    "right_name": self.right_names[j],
                    "score": float(s),
                }
                for i, j, s in self.pairs
            ],
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return stable_json_dumps(self.to_dict())


def greedy_one_to_one(candidates: list[tuple[int, int, float]]) -> list[tuple[int, int, float]]:
    """Accept candidates by descending score (ties: lower left, lower right),
    skipping any whose row or column is already matched."""
    ordered = sorted(candidates, key=lambda c: (-c[2], c[0], c[1]))
    used_left: set[int] = set()
    used_right: set[int] = set()
    chosen = []
    for i, j, s in ordered:
        if i in used_left or j in used_right:
            continue
        chosen.append((i, j, s))
        used_left.add(i)
        used_right.add(j)
    return chosen


def match_schemas(
    src: Schema,
    tgt: Schema,
    ensemble: EnsembleModel,
    config: PipelineConfig,
    profiler: SchemaProfiler | None = None,
) -> MatchResult:
    """Score every cross pair and select matches.

    With a user threshold set, candidates are pairs whose mean score clears
    it; otherwise the ensemble's majority vote decides. Greedy one-to-one
    assignment unless many-to-many output is requested.
    """
    if profiler is None:
        profiler = SchemaProfiler(config)
    expected = hybrid_feature_schema(config.drops)
    if ensemble.feature_schema.hash != expected.hash:
        raise SchemaVersionError(
            "model was trained under feature schema %s but the configuration "
            "produces %s (drops=%s)"
            % (ensemble.feature_schema.hash[:12], expected.hash[:12], list(config.drops))
        )

    left = profiler.profile(src)
    right = profiler.profile(tgt)
    n1, n2 = len(left), len(right)
    X = pair_feature_matrix(left, right, config.epsilon, config.drops)
    scores, decisions = ensemble.predict_matrix(X)
    score_matrix = scores.reshape(n1, n2)
    if config.threshold is not None:
        decision_matrix = score_matrix >= config.threshold
    else:
        decision_matrix = decisions.reshape(n1, n2)

    candidates = [
        (i, j, float(score_matrix[i, j]))
        for i in range(n1)
        for j in range(n2)
        if decision_matrix[i, j]
    ]
    if config.no_assignment:
        pairs = sorted(candidates, key=lambda c: (-c[2], c[0], c[1]))
    else:
        pairs = greedy_one_to_one(candidates)

    provenance = dict(config.snapshot())
    provenance["model_hash"] = ensemble.model_hash
    provenance["feature_schema_hash"] = expected.hash
    return MatchResult(
        left_schema=src.name,
        right_schema=tgt.name,
        left_names=[c.name for c in src.columns],
        right_names=[c.name for c in tgt.columns],
        score_matrix=score_matrix,
        decision_matrix=decision_matrix,
        pairs=pairs,
        provenance=provenance,
    )
