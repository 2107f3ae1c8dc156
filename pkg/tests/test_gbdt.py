import json

import numpy as np
import pytest

from smutf.errors import DataError
from smutf.gbdt import (
    ENSEMBLE_SIZE,
    EnsembleModel,
    FeatureMatrix,
    FeatureSchema,
    GbdtHyperParams,
    GbdtModel,
    Regularization,
    best_f1_threshold,
    default_threshold,
    fast_grid,
    full_grid,
    in_reference_grid,
    logistic_loss,
    stratified_folds,
    subsample_grid,
    train_ensemble,
    train_gbdt,
)


def separable_1d(n_per_class=50, seed=0):
    rng = np.random.default_rng(seed)
    x_neg = rng.uniform(-2.0, -0.1, size=n_per_class)
    x_pos = rng.uniform(0.1, 2.0, size=n_per_class)
    X = np.concatenate([x_neg, x_pos])[:, None]
    y = np.concatenate([np.zeros(n_per_class), np.ones(n_per_class)])
    return X, y


def xor_2d(n=200, seed=1):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(float)
    return X, y


def random_dataset(rng, n=60, f=4):
    X = rng.normal(size=(n, f))
    w = rng.normal(size=f)
    y = (X @ w + rng.normal(scale=0.5, size=n) > 0).astype(float)
    if y.min() == y.max():
        y[0] = 1.0 - y[0]
    return X, y


class TestTrainGbdt:
    def test_separable_reaches_perfect_accuracy(self):
        X, y = separable_1d()
        model = train_gbdt(X, y, GbdtHyperParams(0.1, 3, 50))
        acc = np.mean((model.predict_proba(X) >= 0.5) == y)
        assert acc == 1.0

    def test_constant_features_predict_base_rate(self):
        X = np.ones((40, 3))
        y = np.array([1.0] * 10 + [0.0] * 30)
        model = train_gbdt(X, y, GbdtHyperParams(0.1, 4, 20))
        proba = model.predict_proba(X)
        assert np.allclose(proba, 0.25, atol=1e-12)

    def test_xor_interaction_capture(self):
        X, y = xor_2d()
        model = train_gbdt(X, y, GbdtHyperParams(0.1, 2, 80))
        acc = np.mean((model.predict_proba(X) >= 0.5) == y)
        assert acc >= 0.95

    def test_training_loss_non_increasing(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            X, y = random_dataset(rng)
            model = train_gbdt(X, y, GbdtHyperParams(0.1, 3, 30))
            curve = np.asarray(model.train_loss_curve)
            assert (np.diff(curve) <= 1e-12).all()

    def test_single_class_rejected(self):
        X = np.zeros((10, 2))
        with pytest.raises(DataError):
            train_gbdt(X, np.ones(10), GbdtHyperParams(0.1, 3, 5))

    def test_empty_data_rejected(self):
        with pytest.raises(DataError):
            train_gbdt(np.zeros((1, 2)), np.array([1.0]), GbdtHyperParams(0.1, 3, 5))

    def test_nan_features_rejected(self):
        X = np.array([[np.nan, 1.0], [0.0, 2.0]])
        with pytest.raises(DataError):
            train_gbdt(X, np.array([0.0, 1.0]), GbdtHyperParams(0.1, 3, 5))

    def test_example_order_invariance(self):
        rng = np.random.default_rng(5)
        X, y = random_dataset(rng, n=50)
        perm = rng.permutation(50)
        m1 = train_gbdt(X, y, GbdtHyperParams(0.1, 3, 25))
        m2 = train_gbdt(X[perm], y[perm], GbdtHyperParams(0.1, 3, 25))
        probe = rng.normal(size=(30, 4))
        assert np.array_equal(m1.predict_proba(probe), m2.predict_proba(probe))

    def test_depth_respected(self):
        X, y = xor_2d(n=150, seed=3)
        model = train_gbdt(X, y, GbdtHyperParams(0.1, 2, 20))
        assert all(tree.max_depth() <= 2 for tree in model.trees)

    def test_monotone_signal_gives_monotone_proba(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(-3, 3, size=120)
        y = (x + rng.normal(scale=0.3, size=120) > 0).astype(float)
        model = train_gbdt(x[:, None], y, GbdtHyperParams(0.1, 3, 60))
        grid = np.linspace(-3, 3, 40)[:, None]
        proba = model.predict_proba(grid)
        assert (np.diff(proba) >= -1e-9).all()

    def test_missing_values_learn_default_direction(self):
        # feature present -> class by sign; missing only among positives
        rng = np.random.default_rng(11)
        n = 100
        values = rng.uniform(-1, 1, size=(n, 1))
        y = (values[:, 0] > 0).astype(float)
        missing = np.zeros((n, 1), dtype=bool)
        pos_idx = np.flatnonzero(y == 1)[:20]
        missing[pos_idx] = True
        X = FeatureMatrix(values, missing)
        model = train_gbdt(X, y, GbdtHyperParams(0.1, 3, 40))
        probe = FeatureMatrix(np.zeros((1, 1)), np.ones((1, 1), dtype=bool))
        assert model.predict_proba(probe)[0] > 0.5


class TestPredictProba:
    def test_empty_tree_list_is_sigmoid_base(self):
        X = np.linspace(0, 1, 20)[:, None]
        y = np.array([0.0, 1.0] * 10)
        model = train_gbdt(X, y, GbdtHyperParams(0.1, 3, 0))
        assert model.trees == []
        assert np.allclose(model.predict_proba(X), 0.5)

    def test_output_strictly_inside_unit_interval(self):
        X, y = separable_1d()
        model = train_gbdt(X, y, GbdtHyperParams(0.1, 6, 200))
        proba = model.predict_proba(X)
        assert (proba > 0).all() and (proba < 1).all()

    def test_feature_count_mismatch_raises(self):
        X, y = separable_1d()
        schema = FeatureSchema(names=("x",))
        ens = train_ensemble(X, y, grid=[GbdtHyperParams(0.1, 3, 10)], seed=1, feature_schema=schema)
        with pytest.raises(DataError):
            ens.predict_matrix(np.zeros((3, 2)))


class TestThreshold:
    def test_separated_scores_pick_gap_midpoint(self):
        scores = np.array([0.1, 0.2, 0.8, 0.9])
        y = np.array([0, 0, 1, 1])
        t, f1 = best_f1_threshold(scores, y)
        assert t == pytest.approx(0.5)
        assert f1 == 1.0

    def test_identical_scores_fall_back(self):
        t, _ = best_f1_threshold(np.full(6, 0.7), np.array([0, 1, 0, 1, 0, 1]))
        assert t == 0.5

    def test_matches_exhaustive_scan_with_sklearn_oracle(self):
        from sklearn.metrics import f1_score

        rng = np.random.default_rng(23)
        for trial in range(10):
            scores = rng.random(100)
            y = rng.integers(0, 2, size=100)
            if y.min() == y.max():
                continue
            t, f1 = best_f1_threshold(scores, y)
            uniq = np.unique(scores)
            cands = (uniq[:-1] + uniq[1:]) / 2.0
            oracle = max(f1_score(y, scores >= c, zero_division=0) for c in cands)
            assert f1 == pytest.approx(oracle, abs=1e-12)

    def test_tie_breaks_to_higher_threshold(self):
        # both candidate thresholds give f1 = 0; the higher one must win
        scores = np.array([0.1, 0.2, 0.3])
        y = np.array([1, 0, 0])
        t, f1 = best_f1_threshold(scores, y)
        assert f1 == 0.0
        assert t == pytest.approx(0.25)

    def test_default_threshold_wrapper(self):
        X, y = separable_1d()
        model = train_gbdt(X, y, GbdtHyperParams(0.1, 3, 30))
        t = default_threshold(model, X, y)
        pred = model.predict_proba(X) >= t
        assert np.array_equal(pred, y == 1)


def small_training_set(seed=7, n=240):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(float)
    return X, y


@pytest.fixture(scope="module")
def tiny_ensemble():
    X, y = small_training_set()
    return (
        train_ensemble(
            X,
            y,
            grid=[GbdtHyperParams(0.1, 3, 15), GbdtHyperParams(0.1, 4, 15)],
            seed=3,
            feature_schema=FeatureSchema(names=("a", "b", "c")),
        ),
        X,
        y,
    )


class TestEnsemble:
    def test_has_sixteen_members(self, tiny_ensemble):
        ens, _, _ = tiny_ensemble
        assert len(ens.members) == ENSEMBLE_SIZE

    def test_same_seed_retrain_is_byte_identical(self, tiny_ensemble):
        ens, X, y = tiny_ensemble
        again = train_ensemble(
            X,
            y,
            grid=[GbdtHyperParams(0.1, 3, 15), GbdtHyperParams(0.1, 4, 15)],
            seed=3,
            feature_schema=FeatureSchema(names=("a", "b", "c")),
        )
        assert ens.to_json().encode() == again.to_json().encode()

    def test_parallel_training_matches_serial(self):
        X, y = small_training_set(seed=11, n=200)
        kwargs = dict(grid=[GbdtHyperParams(0.1, 3, 10)], seed=5,
                      feature_schema=FeatureSchema(names=("a", "b", "c")))
        serial = train_ensemble(X, y, jobs=1, **kwargs)
        parallel = train_ensemble(X, y, jobs=4, **kwargs)
        assert serial.to_json() == parallel.to_json()

    def test_single_grid_point_members_differ_by_folds(self, tiny_ensemble):
        ens, _, _ = tiny_ensemble
        jsons = {json.dumps(m.to_dict(), sort_keys=True) for m in ens.members}
        assert len(jsons) > 1  # different training folds give different trees

    def test_grid_winner_is_argmax_per_fold(self):
        X, y = small_training_set(seed=13, n=200)
        grid = [GbdtHyperParams(0.1, 3, 8), GbdtHyperParams(0.05, 4, 12)]
        ens = train_ensemble(X, y, grid=grid, seed=9,
                             feature_schema=FeatureSchema(names=("a", "b", "c")))
        Xm = FeatureMatrix.ensure(X)
        folds = ens.fold_assignments
        for k, member in enumerate(ens.members):
            val = np.flatnonzero(folds == k)
            train = np.flatnonzero(folds != k)
            winner_f1 = best_f1_threshold(member.predict_proba(Xm.take(val)), y[val])[1]
            for hp in grid:
                model = train_gbdt(Xm.take(train), y[train], hp)
                f1 = best_f1_threshold(model.predict_proba(Xm.take(val)), y[val])[1]
                assert winner_f1 >= f1 - 1e-12

    def test_mean_and_majority_match_direct_member_computation(self, tiny_ensemble):
        ens, _, _ = tiny_ensemble
        rng = np.random.default_rng(2)
        probes = rng.normal(size=(50, 3))
        scores, decisions = ens.predict_matrix(probes)
        for i, x in enumerate(probes):
            member_probas = np.array([m.predict_proba_one(x) for m in ens.members])
            assert scores[i] == np.mean(member_probas)
            votes = sum(
                p >= m.threshold for p, m in zip(member_probas, ens.members)
            )
            assert decisions[i] == (votes >= 9)

    def test_tie_vote_is_rejection(self):
        X, y = small_training_set(seed=17, n=120)
        ens = train_ensemble(X, y, grid=[GbdtHyperParams(0.1, 3, 5)], seed=2,
                             feature_schema=FeatureSchema(names=("a", "b", "c")))
        # force an 8-8 split by overriding thresholds around a probe's scores
        probe = np.zeros(3)
        probas = np.array([m.predict_proba_one(probe) for m in ens.members])
        for i, m in enumerate(ens.members):
            m.threshold = probas[i] if i < 8 else probas[i] + 1e-6
        _, decision = ens.predict(probe)
        assert decision == 0

    def test_serialization_round_trip_identical_predictions(self, tiny_ensemble):
        ens, X, _ = tiny_ensemble
        restored = EnsembleModel.from_dict(json.loads(ens.to_json()))
        s1, d1 = ens.predict_matrix(X)
        s2, d2 = restored.predict_matrix(X)
        assert np.array_equal(s1, s2)
        assert np.array_equal(d1, d2)

    def test_too_few_examples_rejected(self):
        X = np.zeros((20, 2))
        y = np.array([0.0, 1.0] * 10)
        with pytest.raises(DataError):
            train_ensemble(X, y, grid=fast_grid())

    def test_fold_without_both_classes_aborts(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(100, 2))
        y = np.zeros(100)
        y[:5] = 1.0  # five positives cannot stratify into 16 folds
        with pytest.raises(DataError, match="fold"):
            train_ensemble(X, y, grid=[GbdtHyperParams(0.1, 3, 5)])


class TestGrid:
    def test_full_grid_size(self):
        grid = full_grid()
        assert len(grid) == 224
        assert len(set(grid)) == 224
        assert all(in_reference_grid(hp) for hp in grid)

    def test_fast_grid_inside_reference(self):
        assert all(in_reference_grid(hp) for hp in fast_grid())

    def test_budget_subsample_is_seeded(self):
        g1 = subsample_grid(full_grid(), 10, seed=4)
        g2 = subsample_grid(full_grid(), 10, seed=4)
        assert g1 == g2 and len(g1) == 10

    def test_off_grid_values_accepted(self):
        assert not in_reference_grid(GbdtHyperParams(0.2, 3, 100))

    def test_invalid_hyperparams_rejected(self):
        with pytest.raises(DataError):
            GbdtHyperParams(0.0, 3, 100)
        with pytest.raises(DataError):
            GbdtHyperParams(0.1, 0, 100)


class TestStratifiedFolds:
    def test_every_fold_gets_both_classes_when_possible(self):
        y = np.array([0] * 64 + [1] * 32)
        folds = stratified_folds(y, 16, seed=1)
        for k in range(16):
            fold_y = y[folds == k]
            assert 0 in fold_y and 1 in fold_y

    def test_deterministic(self):
        y = np.array([0, 1] * 40)
        assert np.array_equal(stratified_folds(y, 16, 9), stratified_folds(y, 16, 9))


def test_logistic_loss_matches_naive_formula():
    rng = np.random.default_rng(8)
    m = rng.normal(size=200)
    y = rng.integers(0, 2, size=200).astype(float)
    p = 1 / (1 + np.exp(-m))
    naive = float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))
    assert logistic_loss(m, y) == pytest.approx(naive, rel=1e-12)
