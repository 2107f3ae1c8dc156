"""Pipeline configuration shared by the library and the CLI.

One top-level seed feeds named sub-streams (row sampling, value sampling,
fold partitioning, fabrication) so every stage is independently
reproducible. A deterministic snapshot of the configuration is embedded in
every output artifact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from .embedding import EmbeddingProviderConfig
from .errors import DataError
from .tagging import LlmTaggerConfig

ABLATION_FAMILIES = (
    "name_rule",
    "name_embedding",
    "data_type",
    "length",
    "numerical",
    "character",
    "value_embedding",
    "tag",
)

DEFAULT_SEED = 7


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = DEFAULT_SEED
    row_cap: int = 100
    embedder: EmbeddingProviderConfig = field(default_factory=EmbeddingProviderConfig)
    tagger: str = "rule"  # or "llm"
    llm: LlmTaggerConfig | None = None
    epsilon: float = 1e-9
    grid_mode: str = "full"  # or "fast"
    budget: int | None = None
    threshold: float | None = None
    drops: tuple[str, ...] = ()
    no_assignment: bool = False
    jobs: int = 0  # 0 = available cores

    def __post_init__(self):
        if self.row_cap < 1:
            raise DataError("row_cap must be positive")
        if self.tagger not in ("rule", "llm"):
            raise DataError("tagger must be 'rule' or 'llm', got %r" % self.tagger)
        if self.tagger == "llm" and self.llm is None:
            raise DataError("tagger 'llm' requires an endpoint configuration")
        if self.epsilon <= 0:
            raise DataError("epsilon must be positive")
        if self.grid_mode not in ("full", "fast"):
            raise DataError("grid mode must be 'full' or 'fast', got %r" % self.grid_mode)
        if self.threshold is not None and not (0.0 < self.threshold < 1.0):
            raise DataError("threshold must lie in (0, 1)")
        unknown = set(self.drops) - set(ABLATION_FAMILIES)
        if unknown:
            raise DataError(
                "unknown ablation families %s; known: %s"
                % (sorted(unknown), ", ".join(ABLATION_FAMILIES))
            )
        if self.budget is not None and self.budget < 1:
            raise DataError("budget must be >= 1")
        if self.jobs < 0:
            raise DataError("jobs must be >= 0")

    @property
    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    def with_drops(self, drops) -> "PipelineConfig":
        return replace(self, drops=tuple(sorted(set(drops))))

    def snapshot(self) -> dict:
        """Deterministic provenance record embedded in output artifacts."""
        return {
            "seed": self.seed,
            "row_cap": self.row_cap,
            "embedder": {"kind": self.embedder.kind, "dim": self.embedder.dim,
                         "model": self.embedder.model_name if self.embedder.kind == "remote" else None},
            "tagger": self.tagger,
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "drops": sorted(self.drops),
            "no_assignment": self.no_assignment,
        }
