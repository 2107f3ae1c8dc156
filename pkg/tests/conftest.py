import numpy as np
import pytest

from smutf.bench import FabricateParams, build_training_set, fabricate, resolve_gold
from smutf.config import PipelineConfig
from smutf.gbdt import GbdtHyperParams, train_ensemble
from smutf.matcher import SchemaProfiler, hybrid_feature_schema
from smutf.schema import Column, Schema

from .helpers import make_demo_rows

_ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = ""):
    _ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        line = "%s: %s" % (name, status)
        if detail:
            line += " (%s)" % detail
        terminalreporter.write_line(line)


def demo_schema(name: str, n_rows: int = 120, seed: int = 0) -> Schema:
    header, rows = make_demo_rows(n_rows, seed)
    return Schema(
        name=name,
        columns=tuple(
            Column(h, tuple(row[j] for row in rows)) for j, h in enumerate(header)
        ),
    )


@pytest.fixture(scope="session")
def base_config():
    return PipelineConfig(seed=11, row_cap=100)


@pytest.fixture(scope="session")
def trained_ensemble(base_config):
    """Small but real model: trained on two unionable pairs of demo tables."""
    profiler = SchemaProfiler(base_config)
    triples = []
    for i in range(2):
        table = demo_schema("train%d" % i, n_rows=120, seed=100 + i)
        left, right, gold = fabricate(
            table, "unionable", FabricateParams(row_overlap_pct=50.0), seed=i
        )
        triples.append((left, right, resolve_gold(gold, left, right)))
    X, y = build_training_set(triples, base_config, profiler)
    return train_ensemble(
        X,
        y,
        grid=[GbdtHyperParams(0.1, 3, 60)],
        seed=base_config.seed,
        feature_schema=hybrid_feature_schema(base_config.drops),
    )
