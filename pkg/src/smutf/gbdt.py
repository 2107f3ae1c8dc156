"""Gradient-boosted regression trees for binary classification, from scratch.

Logistic loss, exact greedy split search over midpoints of sorted distinct
feature values, second-order (Newton) leaf weights, explicit missing-value
handling with learned default directions, a 16-model soft-voting ensemble
with per-member thresholds, and exhaustive grid hyperparameter search.

Determinism: training is invariant to example order (rows are canonically
sorted internally) and split ties break toward the lowest feature index,
then the lowest threshold.
"""

from __future__ import annotations

import itertools
import logging
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .util import derive_seed, sha256_hex, stable_json_dumps

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
ENSEMBLE_SIZE = 16
MAJORITY_VOTES = ENSEMBLE_SIZE // 2 + 1  # 9 of 16; an 8-8 tie is a non-match

GRID_LEARNING_RATES = (0.1, 0.08, 0.05, 0.03)
GRID_MAX_DEPTHS = (3, 4, 5, 6, 7, 8, 9, 10)
GRID_NUM_ROUNDS = (100, 200, 300, 400, 500, 600, 700)

_PROBA_CLIP = 1e-12


@dataclass(frozen=True)
class GbdtHyperParams:
    learning_rate: float
    max_depth: int
    num_round: int

    def __post_init__(self):
        if not (0 < self.learning_rate <= 1):
            raise DataError("learning_rate must be in (0, 1], got %r" % self.learning_rate)
        if self.max_depth < 1:
            raise DataError("max_depth must be >= 1, got %r" % self.max_depth)
        if self.num_round < 0:
            raise DataError("num_round must be >= 0, got %r" % self.num_round)


def in_reference_grid(hp: GbdtHyperParams) -> bool:
    return (
        hp.learning_rate in GRID_LEARNING_RATES
        and hp.max_depth in GRID_MAX_DEPTHS
        and hp.num_round in GRID_NUM_ROUNDS
    )


def full_grid() -> list[GbdtHyperParams]:
    """All 224 reference combinations, in a fixed enumeration order."""
    return [
        GbdtHyperParams(lr, depth, rounds)
        for lr, depth, rounds in itertools.product(
            GRID_LEARNING_RATES, GRID_MAX_DEPTHS, GRID_NUM_ROUNDS
        )
    ]


def fast_grid() -> list[GbdtHyperParams]:
    """A small subset of the reference grid for quick runs."""
    return [
        GbdtHyperParams(0.1, 3, 100),
        GbdtHyperParams(0.1, 6, 100),
        GbdtHyperParams(0.08, 4, 200),
    ]


def subsample_grid(grid: list[GbdtHyperParams], budget: int, seed: int) -> list[GbdtHyperParams]:
    """Seeded subsample of ``budget`` grid points, preserving grid order."""
    if budget >= len(grid):
        return list(grid)
    if budget < 1:
        raise DataError("grid budget must be >= 1, got %d" % budget)
    picked = sorted(random.Random(derive_seed(seed, "grid-budget")).sample(range(len(grid)), budget))
    return [grid[i] for i in picked]


@dataclass(frozen=True)
class Regularization:
    lam: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature names plus the masked families, hashed for versioning."""

    names: tuple[str, ...]
    drops: tuple[str, ...] = ()

    @property
    def hash(self) -> str:
        return sha256_hex(stable_json_dumps({"names": list(self.names), "drops": sorted(self.drops)}))

    def to_dict(self) -> dict:
        return {"names": list(self.names), "drops": sorted(self.drops), "hash": self.hash}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSchema":
        schema = cls(names=tuple(data["names"]), drops=tuple(data.get("drops", ())))
        if "hash" in data and data["hash"] != schema.hash:
            raise DataError("feature schema hash mismatch in model file")
        return schema


class FeatureMatrix:
    """Dense float features with an explicit missing mask (no NaN sentinels)."""

    __slots__ = ("values", "missing")

    def __init__(self, values: np.ndarray, missing: np.ndarray | None = None):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("feature matrix must be 2-D, got shape %s" % (values.shape,))
        if not np.all(np.isfinite(values)):
            raise DataError("feature matrix contains non-finite values; encode missing via the mask")
        if missing is None:
            missing = np.zeros(values.shape, dtype=bool)
        missing = np.ascontiguousarray(missing, dtype=bool)
        if missing.shape != values.shape:
            raise DataError("missing mask shape %s != values shape %s" % (missing.shape, values.shape))
        # keep masked slots at a fixed placeholder so equal matrices serialize equally
        values = np.where(missing, 0.0, values)
        self.values = values
        self.missing = missing

    @classmethod
    def ensure(cls, X) -> "FeatureMatrix":
        return X if isinstance(X, FeatureMatrix) else cls(np.asarray(X))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def take(self, idx: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.values[idx], self.missing[idx])


# --- single tree -------------------------------------------------------------

class RegressionTree:
    """Flat-array binary tree: internal nodes route, leaves carry weights."""

    __slots__ = ("feature", "threshold", "default_left", "left", "right", "leaf", "is_leaf")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.default_left: list[bool] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.leaf: list[float] = []
        self.is_leaf: list[bool] = []

    def add_leaf(self, weight: float) -> int:
        self._append(is_leaf=True, leaf=weight)
        return len(self.leaf) - 1

    def add_split(self, feature: int, threshold: float, default_left: bool) -> int:
        self._append(is_leaf=False, feature=feature, threshold=threshold, default_left=default_left)
        return len(self.leaf) - 1

    def _append(self, is_leaf, leaf=0.0, feature=-1, threshold=0.0, default_left=True):
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.default_left.append(default_left)
        self.left.append(-1)
        self.right.append(-1)
        self.leaf.append(leaf)
        self.is_leaf.append(is_leaf)

    def predict_batch(self, values: np.ndarray, missing: np.ndarray) -> np.ndarray:
        out = np.empty(values.shape[0], dtype=np.float64)
        stack = [(0, np.arange(values.shape[0]))]
        while stack:
            nid, rows = stack.pop()
            if rows.size == 0:
                continue
            if self.is_leaf[nid]:
                out[rows] = self.leaf[nid]
                continue
            f = self.feature[nid]
            miss = missing[rows, f]
            below = values[rows, f] < self.threshold[nid]
            go_left = np.where(miss, self.default_left[nid], below)
            stack.append((self.left[nid], rows[go_left]))
            stack.append((self.right[nid], rows[~go_left]))
        return out

    def node_dicts(self) -> list[dict]:
        nodes = []
        for i in range(len(self.leaf)):
            if self.is_leaf[i]:
                nodes.append({"leaf": float(self.leaf[i])})
            else:
                nodes.append(
                    {
                        "feature": int(self.feature[i]),
                        "threshold": float(self.threshold[i]),
                        "default_left": bool(self.default_left[i]),
                        "left": int(self.left[i]),
                        "right": int(self.right[i]),
                    }
                )
        return nodes

    @classmethod
    def from_node_dicts(cls, nodes: list[dict]) -> "RegressionTree":
        tree = cls()
        for node in nodes:
            if "leaf" in node:
                tree.add_leaf(float(node["leaf"]))
            else:
                nid = tree.add_split(
                    int(node["feature"]), float(node["threshold"]), bool(node["default_left"])
                )
                tree.left[nid] = int(node["left"])
                tree.right[nid] = int(node["right"])
        return tree

    def max_depth(self) -> int:
        if not self.leaf:
            return 0
        depths = {0: 0}
        best = 0
        for i in range(len(self.leaf)):
            d = depths[i]
            if self.is_leaf[i]:
                best = max(best, d)
            else:
                depths[self.left[i]] = d + 1
                depths[self.right[i]] = d + 1
        return best


def _sigmoid(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


def logistic_loss(margins: np.ndarray, y: np.ndarray) -> float:
    """Mean logistic loss, computed stably via log(1+e^m) - y*m."""
    return float(np.mean(np.logaddexp(0.0, margins) - y * margins))


@dataclass
class _Split:
    gain: float
    feature: int
    threshold: float
    default_left: bool


def _find_split(V, M, g, h, reg: Regularization) -> _Split | None:
    """Exact greedy search over all features and distinct-value midpoints.

    Vectorized across features: one argsort of the node's submatrix, gradient
    and hessian prefix sums, then gains for both missing-value directions.
    """
    n, f = V.shape
    if n < 2:
        return None
    G = float(g.sum())
    H = float(h.sum())
    lam, gamma_, mcw = reg.lam, reg.gamma, reg.min_child_weight
    parent = G * G / (H + lam)

    work = np.where(M, np.inf, V)
    order = np.argsort(work, axis=0, kind="stable")
    Vs = np.take_along_axis(work, order, axis=0)
    cg = np.cumsum(g[order], axis=0)
    ch = np.cumsum(h[order], axis=0)

    n_present = n - M.sum(axis=0)
    has_present = n_present > 0
    last = np.maximum(n_present - 1, 0)
    Gp = np.where(has_present, np.take_along_axis(cg, last[None, :], axis=0)[0], 0.0)
    Hp = np.where(has_present, np.take_along_axis(ch, last[None, :], axis=0)[0], 0.0)
    Gm, Hm = G - Gp, H - Hp  # per-feature sums over missing rows

    # boundary i separates sorted positions <= i from > i
    GL, HL = cg[:-1], ch[:-1]
    boundary = np.arange(n - 1)[:, None]
    valid = (boundary < (n_present - 1)[None, :]) & (Vs[:-1] < Vs[1:])

    def gains(GLd, HLd):
        GRd, HRd = G - GLd, H - HLd
        ok = valid & (HLd >= mcw) & (HRd >= mcw)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = 0.5 * (GLd**2 / (HLd + lam) + GRd**2 / (HRd + lam) - parent) - gamma_
        return np.where(ok, raw, -np.inf)

    gain_right = gains(GL, HL)  # missing rows routed right
    gain_left = gains(GL + Gm[None, :], HL + Hm[None, :])  # missing rows routed left
    default_left = gain_left >= gain_right  # tie -> left
    best_dir = np.maximum(gain_left, gain_right)

    # feature-major flattening: ties break to lowest feature, then lowest threshold
    flat = best_dir.T.ravel()
    pos = int(np.argmax(flat))
    gain = float(flat[pos])
    if not math.isfinite(gain) or gain <= 0.0:
        return None
    feat, b = divmod(pos, n - 1)
    threshold = float((Vs[b, feat] + Vs[b + 1, feat]) / 2.0)
    return _Split(gain=gain, feature=int(feat), threshold=threshold,
                  default_left=bool(default_left[b, feat]))


def _build_tree(V, M, g, h, max_depth: int, reg: Regularization) -> RegressionTree:
    tree = RegressionTree()

    def grow(rows: np.ndarray, depth: int) -> int:
        gs, hs = g[rows], h[rows]
        split = None
        if depth < max_depth:
            split = _find_split(V[rows], M[rows], gs, hs, reg)
        if split is None:
            return tree.add_leaf(-float(gs.sum()) / (float(hs.sum()) + reg.lam))
        nid = tree.add_split(split.feature, split.threshold, split.default_left)
        miss = M[rows, split.feature]
        below = V[rows, split.feature] < split.threshold
        go_left = np.where(miss, split.default_left, below)
        tree.left[nid] = grow(rows[go_left], depth + 1)
        tree.right[nid] = grow(rows[~go_left], depth + 1)
        return nid

    grow(np.arange(V.shape[0]), 0)
    return tree


# --- boosted model -----------------------------------------------------------

@dataclass
class GbdtModel:
    hyperparams: GbdtHyperParams
    regularization: Regularization
    base_score: float
    trees: list[RegressionTree]
    threshold: float = 0.5
    train_loss_curve: list[float] = field(default_factory=list, repr=False)

    def predict_margin(self, X) -> np.ndarray:
        X = FeatureMatrix.ensure(X)
        margin = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            margin += self.hyperparams.learning_rate * tree.predict_batch(X.values, X.missing)
        return margin

    def predict_proba(self, X) -> np.ndarray:
        proba = _sigmoid(self.predict_margin(X))
        return np.clip(proba, _PROBA_CLIP, 1.0 - _PROBA_CLIP)

    def predict_proba_one(self, x) -> float:
        if isinstance(x, FeatureMatrix):
            return float(self.predict_proba(x)[0])
        return float(self.predict_proba(np.asarray(x, dtype=np.float64)[None, :])[0])

    def to_dict(self) -> dict:
        return {
            "hyperparams": {
                "learning_rate": self.hyperparams.learning_rate,
                "max_depth": self.hyperparams.max_depth,
                "num_round": self.hyperparams.num_round,
                "lambda": self.regularization.lam,
                "gamma": self.regularization.gamma,
                "min_child_weight": self.regularization.min_child_weight,
            },
            "base_score": float(self.base_score),
            "threshold": float(self.threshold),
            "trees": [{"nodes": tree.node_dicts()} for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GbdtModel":
        hp = data["hyperparams"]
        return cls(
            hyperparams=GbdtHyperParams(hp["learning_rate"], hp["max_depth"], hp["num_round"]),
            regularization=Regularization(hp["lambda"], hp["gamma"], hp["min_child_weight"]),
            base_score=float(data["base_score"]),
            trees=[RegressionTree.from_node_dicts(t["nodes"]) for t in data["trees"]],
            threshold=float(data["threshold"]),
        )


def _canonical_order(X: FeatureMatrix, y: np.ndarray) -> np.ndarray:
    """Row order independent of input permutation (ties are interchangeable)."""
    keys = (y,)
    keys += tuple(X.missing[:, j] for j in reversed(range(X.shape[1])))
    keys += tuple(X.values[:, j] for j in reversed(range(X.shape[1])))
    return np.lexsort(keys)


def train_gbdt(X, y, hp: GbdtHyperParams, reg: Regularization = Regularization()) -> GbdtModel:
    """Boost ``num_round`` trees against the logistic loss.

    Requires both classes present. Deterministic given inputs; example order
    does not matter.
    """
    X = FeatureMatrix.ensure(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise DataError("feature/label length mismatch: %d vs %d" % (X.shape[0], y.shape[0]))
    if y.shape[0] < 2:
        raise DataError("need at least 2 training examples")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError("labels must be binary 0/1")
    pos_rate = float(y.mean())
    if pos_rate in (0.0, 1.0):
        raise DataError("training labels contain a single class")
    if not in_reference_grid(hp):
        logger.debug("hyperparameters %s are outside the reference grid", hp)

    order = _canonical_order(X, y)
    X = X.take(order)
    y = y[order]
    V, M = X.values, X.missing

    base = math.log(pos_rate / (1.0 - pos_rate))
    margin = np.full(y.shape[0], base, dtype=np.float64)
    losses = [logistic_loss(margin, y)]
    trees: list[RegressionTree] = []
    for _ in range(hp.num_round):
        p = _sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        tree = _build_tree(V, M, g, h, hp.max_depth, reg)
        trees.append(tree)
        margin += hp.learning_rate * tree.predict_batch(V, M)
        losses.append(logistic_loss(margin, y))
    return GbdtModel(
        hyperparams=hp,
        regularization=reg,
        base_score=base,
        trees=trees,
        train_loss_curve=losses,
    )


# --- threshold selection -----------------------------------------------------

def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def _f1_at(scores: np.ndarray, y: np.ndarray, threshold: float) -> float:
    pred = scores >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return f1_from_counts(tp, fp, fn)


def best_f1_threshold(scores: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Scan midpoints of sorted unique scores for the F1-maximizing threshold.

    Ties break toward the higher threshold (favor precision). Degenerate
    inputs (single class, or all scores identical) fall back to 0.5.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    uniq = np.unique(scores)
    if uniq.size < 2 or y.min() == y.max():
        return 0.5, _f1_at(scores, y, 0.5)
    best_t, best_f1 = 0.5, -1.0
    for t in (uniq[:-1] + uniq[1:]) / 2.0:
        f1 = _f1_at(scores, y, float(t))
        if f1 >= best_f1:
            best_t, best_f1 = float(t), f1
    return best_t, best_f1


def default_threshold(model: GbdtModel, X_val, y_val) -> float:
    return best_f1_threshold(model.predict_proba(X_val), np.asarray(y_val))[0]


# --- 16-member ensemble ------------------------------------------------------

@dataclass
class EnsembleModel:
    members: list[GbdtModel]
    feature_schema: FeatureSchema
    fold_assignments: np.ndarray | None = None

    def __post_init__(self):
        if len(self.members) != ENSEMBLE_SIZE:
            raise DataError("ensemble needs exactly %d members, got %d" % (ENSEMBLE_SIZE, len(self.members)))

    def _member_probas(self, X) -> np.ndarray:
        X = FeatureMatrix.ensure(X)
        if X.shape[1] != len(self.feature_schema.names):
            raise DataError(
                "feature count %d does not match model schema (%d features)"
                % (X.shape[1], len(self.feature_schema.names))
            )
        return np.stack([m.predict_proba(X) for m in self.members])

    def predict_matrix(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Soft-voted scores and majority decisions for a batch.

        The score is the mean of the 16 member probabilities, reduced per
        example over a contiguous member axis so it is bit-identical to
        averaging the members one by one.
        """
        probas = self._member_probas(X)
        cols = np.ascontiguousarray(probas.T)
        scores = np.array([np.mean(c) for c in cols], dtype=np.float64)
        thresholds = np.array([m.threshold for m in self.members])[:, None]
        votes = (probas >= thresholds).sum(axis=0)
        return scores, votes >= MAJORITY_VOTES

    def predict(self, x) -> tuple[float, int]:
        if not isinstance(x, FeatureMatrix):
            x = FeatureMatrix(np.asarray(x, dtype=np.float64)[None, :])
        scores, decisions = self.predict_matrix(x)
        return float(scores[0]), int(decisions[0])

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "feature_schema": self.feature_schema.to_dict(),
            "members": [m.to_dict() for m in self.members],
        }

    def to_json(self) -> str:
        return stable_json_dumps(self.to_dict())

    @property
    def model_hash(self) -> str:
        return sha256_hex(self.to_json())

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleModel":
        if data.get("format_version") != MODEL_FORMAT_VERSION:
            raise DataError(
                "unsupported model format_version %r (expected %d)"
                % (data.get("format_version"), MODEL_FORMAT_VERSION)
            )
        return cls(
            members=[GbdtModel.from_dict(m) for m in data["members"]],
            feature_schema=FeatureSchema.from_dict(data["feature_schema"]),
        )


def stratified_folds(y: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Seeded stratified partition: shuffle each class, deal round-robin."""
    y = np.asarray(y)
    rng = random.Random(seed)
    folds = np.empty(y.shape[0], dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls).tolist()
        rng.shuffle(idx)
        for pos, example in enumerate(idx):
            folds[example] = pos % n_folds
    return folds


def train_ensemble(
    X,
    y,
    grid: list[GbdtHyperParams] | None = None,
    seed: int = 0,
    reg: Regularization = Regularization(),
    feature_schema: FeatureSchema | None = None,
    budget: int | None = None,
    jobs: int = 1,
) -> EnsembleModel:
    """Train the 16-member ensemble with per-fold grid search.

    Each fold serves as validation once: every grid point is trained on the
    other 15 folds and scored by its best F1 on the held-out fold; the winner
    keeps that fold's F1-maximizing threshold. Ties prefer earlier grid
    entries. Exhaustive over the full 224-point reference grid by default.
    """
    X = FeatureMatrix.ensure(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] < 2 * ENSEMBLE_SIZE:
        raise DataError("need at least %d examples to build %d stratified folds"
                        % (2 * ENSEMBLE_SIZE, ENSEMBLE_SIZE))
    if grid is None:
        grid = full_grid()
    if not grid:
        raise DataError("hyperparameter grid is empty")
    if budget is not None:
        grid = subsample_grid(grid, budget, seed)
    if feature_schema is None:
        feature_schema = FeatureSchema(names=tuple("f%d" % i for i in range(X.shape[1])))
    if len(feature_schema.names) != X.shape[1]:
        raise DataError("feature schema lists %d names for %d features"
                        % (len(feature_schema.names), X.shape[1]))

    folds = stratified_folds(y, ENSEMBLE_SIZE, derive_seed(seed, "folds"))
    for k in range(ENSEMBLE_SIZE):
        fold_y = y[folds == k]
        if fold_y.size == 0 or fold_y.min() == fold_y.max():
            raise DataError(
                "fold %d lacks both classes after stratification "
                "(%d positives in %d examples total); more labeled pairs are needed"
                % (k, int(y.sum()), y.size)
            )

    def fit_member(k: int) -> GbdtModel:
        train_idx = np.flatnonzero(folds != k)
        val_idx = np.flatnonzero(folds == k)
        X_train, y_train = X.take(train_idx), y[train_idx]
        X_val, y_val = X.take(val_idx), y[val_idx]
        best: tuple[float, GbdtModel] | None = None
        for hp in grid:
            model = train_gbdt(X_train, y_train, hp, reg)
            thr, f1 = best_f1_threshold(model.predict_proba(X_val), y_val)
            if best is None or f1 > best[0]:
                model.threshold = thr
                best = (f1, model)
        return best[1]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            members = list(pool.map(fit_member, range(ENSEMBLE_SIZE)))
    else:
        members = [fit_member(k) for k in range(ENSEMBLE_SIZE)]
    return EnsembleModel(members=members, feature_schema=feature_schema, fold_assignments=folds)
