"""Schema matching for tabular data with hybrid similarity features.

Match columns across two tables by combining name similarities, value
statistics, text embeddings, and semantic tags, scored by a boosted-tree
ensemble. Fully offline by default (deterministic hashed embeddings and a
rule tagger), with optional remote embedding and chat-tagging services.
"""

from .bench import (
    DatasetManifest,
    EvalReport,
    FabricateParams,
    GoldEntry,
    GoldMapping,
    ablate,
    evaluate_dataset,
    evaluate_pair,
    fabricate,
    load_gold_jsonl,
    mann_whitney_auc,
    resolve_gold,
    write_gold_jsonl,
)
from .config import ABLATION_FAMILIES, PipelineConfig
from .embedding import (
    EmbeddingProviderConfig,
    HashedNgramProvider,
    RemoteEmbeddingProvider,
    cosine,
    embed_value_set,
    make_provider,
)
from .errors import DataError, ProviderError, SchemaVersionError, SmutfError
from .gbdt import (
    EnsembleModel,
    FeatureMatrix,
    FeatureSchema,
    GbdtHyperParams,
    GbdtModel,
    Regularization,
    default_threshold,
    fast_grid,
    full_grid,
    train_ensemble,
    train_gbdt,
)
from .matcher import (
    ColumnProfile,
    HybridFeature,
    HYBRID_FEATURE_NAMES,
    MatchResult,
    SchemaProfiler,
    hybrid_feature_schema,
    hybrid_features,
    match_schemas,
)
from .name_features import (
    NameFeatureVector,
    bleu_score,
    damerau_levenshtein,
    edit_similarity,
    lcs_ratio,
    name_features,
    one_in_one,
    tokenize_name,
)
from .schema import (
    Column,
    DataTypeLabel,
    Schema,
    detect_cell_type,
    detect_column_type,
    load_csv,
    sample_text_values,
)
from .tagging import (
    HxlTag,
    LlmTagger,
    LlmTaggerConfig,
    PromptBundle,
    TagMatchScore,
    build_prompt,
    llm_tag,
    parse_tag,
    rule_tag,
    tag_match,
)
from .value_features import (
    ColumnValueFeatures,
    VALUE_FEATURE_NAMES,
    column_value_features,
    value_embedding,
    value_pair,
)

__version__ = "0.1.0"
