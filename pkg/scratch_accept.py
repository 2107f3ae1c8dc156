"""Scratch exploration for the end-to-end acceptance setup (not shipped)."""

import sys
import time

sys.path.insert(0, "tests")

import numpy as np

from smutf.bench import (
    FabricateParams,
    ablate,
    build_training_set,
    evaluate_pair,
    fabricate,
    resolve_gold,
)
from smutf.config import PipelineConfig
from smutf.gbdt import GbdtHyperParams, train_ensemble
from smutf.matcher import SchemaProfiler, hybrid_feature_schema, match_schemas
from smutf.schema import Column, Schema

from helpers import make_confusable_rows, make_demo_rows


def demo_schema(name, n_rows, seed):
    header, rows = make_demo_rows(n_rows, seed)
    return Schema(
        name=name,
        columns=tuple(Column(h, tuple(r[j] for r in rows)) for j, h in enumerate(header)),
    )


def confusable_schema(name, n_rows, seed):
    header, rows = make_confusable_rows(n_rows, seed)
    return Schema(
        name=name,
        columns=tuple(Column(h, tuple(r[j] for r in rows)) for j, h in enumerate(header)),
    )


def run_eval(pairs, ensemble, config, profiler):
    f1s, aucs = [], []
    for left, right, gold in pairs:
        result = match_schemas(left, right, ensemble, config, profiler)
        ev = evaluate_pair(result, resolve_gold(gold, left, right))
        f1s.append(ev.f1)
        if ev.auc is not None:
            aucs.append(ev.auc)
    return float(np.mean(f1s)), float(np.mean(aucs)) if aucs else None


def crit6_and_8():
    config = PipelineConfig(seed=2024, row_cap=100)
    profiler = SchemaProfiler(config)
    t0 = time.time()
    tables = [demo_schema("t%d" % i, 220, seed=1000 + i) for i in range(3)]
    train_triples = []
    for i in range(2):
        l, r, g = fabricate(tables[i], "unionable", FabricateParams(row_overlap_pct=50), seed=i)
        train_triples.append((l, r, resolve_gold(g, l, r)))
    X, y = build_training_set(train_triples, config, profiler)
    print("train examples:", y.size, "positives:", int(y.sum()))
    ens = train_ensemble(X, y, grid=[GbdtHyperParams(0.1, 3, 100)], seed=config.seed,
                         feature_schema=hybrid_feature_schema())
    print("train time: %.1fs" % (time.time() - t0))
    l, r, g = fabricate(tables[2], "unionable", FabricateParams(row_overlap_pct=50), seed=7)
    f1, auc = run_eval([(l, r, g)], ens, config, profiler)
    print("crit6  macro-F1 %.4f macro-AUC %.4f  (%.1fs)" % (f1, auc, time.time() - t0))

    # crit 8: row-cap sweep; rebuild schemas at different caps by resampling rows
    for cap in (10, 50, 100):
        cfg = PipelineConfig(seed=2024, row_cap=cap)
        prof = SchemaProfiler(cfg)

        def capped(schema, seed):
            import random as _r

            n = len(schema.columns[0].values)
            if n <= cap:
                return schema
            keep = sorted(_r.Random(seed).sample(range(n), cap))
            return Schema(schema.name, tuple(
                Column(c.name, tuple(c.values[i] for i in keep)) for c in schema.columns
            ))

        lc, rc = capped(l, 1), capped(r, 2)
        f1c, aucc = run_eval([(lc, rc, g)], ens, cfg, prof)
        print("crit8 cap %3d  F1 %.4f AUC %.4f" % (cap, f1c, aucc))


def crit7():
    t0 = time.time()
    base = PipelineConfig(seed=77, row_cap=100)
    tables = [confusable_schema("t%d" % i, 220, seed=1000 + i) for i in range(3)]
    params = FabricateParams(row_overlap_pct=80, col_overlap_pct=50, noise=0.5, typo_rate=0.1)

    def make_pairs(table_ids, seeds):
        out = []
        for i in table_ids:
            for s in seeds:
                l, r, g = fabricate(tables[i], "sem_joinable", params, seed=s)
                out.append((l, r, g))
        return out

    train_pairs = make_pairs([0, 1], [0, 1, 2])
    eval_pairs = make_pairs([2], [10, 11, 12])

    for label, cfg in [
        ("full", base),
        ("no_value_embedding", ablate(base, ("value_embedding",))),
        ("no_tag", ablate(base, ("tag",))),
    ]:
        profiler = SchemaProfiler(cfg)
        triples = [(l, r, resolve_gold(g, l, r)) for l, r, g in train_pairs]
        X, y = build_training_set(triples, cfg, profiler)
        ens = train_ensemble(X, y, grid=[GbdtHyperParams(0.1, 3, 100)], seed=cfg.seed,
                             feature_schema=hybrid_feature_schema(cfg.drops))
        f1, auc = run_eval(eval_pairs, ens, cfg, profiler)
        print("%-22s macro-F1 %.4f macro-AUC %s  (n=%d pos=%d)" % (
            label, f1, "n/a" if auc is None else "%.4f" % auc, y.size, int(y.sum())))
    print("crit7 time: %.1fs" % (time.time() - t0))


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "all"
    if which in ("all", "6"):
        crit6_and_8()
    if which in ("all", "7"):
        crit7()
