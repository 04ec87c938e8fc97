import itertools
import json

import numpy as np
import pytest

from tsawf.classifier import (
    FeatureColumn,
    FeatureMatrix,
    GbdtHyperParams,
    _label_from_scores,
    build_feature_matrix,
    load_model,
    predict,
    predict_matrix,
    sort_prototypes,
    train_classifier,
    train_gbdt,
    train_threshold,
)
from tsawf.engine import DistanceEngine
from tsawf.errors import (
    ConfigError,
    DegenerateLabels,
    InsufficientData,
    LengthMismatch,
    SchemaMismatch,
)
from tsawf.prototypes import Prototype, Strategy
from tsawf.trace import UNMONITORED, Trace, split_directions

from synthdata import make_class_dataset, make_template


def toy_matrix(values, labels, class_ids, n_protos=1, measures=("euclidean",), schema="toy"):
    columns = tuple(
        FeatureColumn(cid, rank, m)
        for cid in class_ids
        for rank in range(n_protos)
        for m in measures
    )
    values = np.asarray(values, dtype=np.float64)
    assert values.shape[1] == len(columns)
    return FeatureMatrix(
        values=values,
        labels=np.asarray(labels, dtype=np.int64),
        sample_ids=tuple(f"s{i}" for i in range(values.shape[0])),
        columns=columns,
        schema_hash=schema,
    )


def separable_two_class(n_per_class=10, gap=10.0, rng=None):
    rng = rng or np.random.default_rng(0)
    rows, labels = [], []
    for cid in (0, 1):
        for _ in range(n_per_class):
            own = rng.uniform(0.0, 1.0)
            other = gap + rng.uniform(0.0, 1.0)
            row = [own, other] if cid == 0 else [other, own]
            rows.append(row)
            labels.append(cid)
    return toy_matrix(rows, labels, [0, 1])


def gaussian_three_class(n_per_class, rng):
    rows, labels = [], []
    for cid in (0, 1, 2):
        for _ in range(n_per_class):
            row = rng.normal(3.0, 0.3, size=3)
            row[cid] = rng.normal(1.0, 0.3)
            rows.append(np.abs(row))
            labels.append(cid)
    return toy_matrix(rows, labels, [0, 1, 2])


def stump_baseline(train, test):
    """Best single-feature threshold rule, found exhaustively on the train set."""
    best = (-1.0, None)
    n_features = train.values.shape[1]
    for f in range(n_features):
        xs = np.unique(train.values[:, f])
        for thr in (xs[:-1] + xs[1:]) / 2:
            left = train.values[:, f] <= thr
            if not left.any() or left.all():
                continue
            left_label = np.bincount(train.labels[left]).argmax()
            right_label = np.bincount(train.labels[~left]).argmax()
            pred = np.where(left, left_label, right_label)
            acc = (pred == train.labels).mean()
            if acc > best[0]:
                best = (acc, (f, thr, int(left_label), int(right_label)))
    f, thr, ll, rl = best[1]
    pred = np.where(test.values[:, f] <= thr, ll, rl)
    return (pred == test.labels).mean()


class TestFeatureMatrix:
    def _protos(self, n_classes, per_class, rng):
        protos = []
        for cid in range(n_classes):
            for rank in range(per_class):
                t = make_template(rng, n_events=8, label=cid, source_id=f"p{cid}_{rank}")
                protos.append(
                    Prototype(t, cid, Strategy.RANDOM, rank, split_directions(t))
                )
        return protos

    def test_column_arithmetic_50_classes(self, rng):
        protos = self._protos(50, 2, rng)
        engine = DistanceEngine(
            ["matrix_profile", "euclidean", "weighted_euclidean", "cbd", "dtw"]
        )
        samples = [protos[0].trace, protos[7].trace]
        matrix = build_feature_matrix(samples, protos, engine)
        assert matrix.values.shape == (2, 50 * 2 * 5)
        assert len(matrix.columns) == 500
        # column order: class asc, rank asc, measure canonical
        assert matrix.columns[0] == FeatureColumn(0, 0, "matrix_profile")
        assert matrix.columns[5] == FeatureColumn(0, 1, "matrix_profile")
        assert matrix.columns[10] == FeatureColumn(1, 0, "matrix_profile")

    def test_sample_equal_to_prototype_has_zero_euclidean_column(self, rng):
        protos = self._protos(3, 1, rng)
        engine = DistanceEngine(["euclidean"])
        matrix = build_feature_matrix([protos[1].trace], protos, engine)
        assert matrix.values[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert np.all(matrix.values[0, [0, 2]] > 0)

    def test_row_order_follows_sample_order(self, rng):
        protos = self._protos(2, 1, rng)
        engine = DistanceEngine(["euclidean"])
        samples = [protos[0].trace, protos[1].trace]
        a = build_feature_matrix(samples, protos, engine)
        b = build_feature_matrix(samples[::-1], protos, engine)
        assert np.array_equal(a.values[0], b.values[1])
        assert np.array_equal(a.values[1], b.values[0])
        assert a.schema_hash == b.schema_hash
        assert a.columns == b.columns

    def test_class_min_layout(self, rng):
        protos = self._protos(2, 3, rng)
        engine = DistanceEngine(["euclidean", "dtw"])
        sample = [protos[0].trace]
        full = build_feature_matrix(sample, protos, engine, layout="full")
        cmin = build_feature_matrix(sample, protos, engine, layout="class_min")
        assert cmin.values.shape == (1, 2 * 2)
        assert full.schema_hash != cmin.schema_hash
        for ci, cid in enumerate((0, 1)):
            cols = [i for i, c in enumerate(full.columns) if c.class_id == cid]
            expected = full.values[0, cols].reshape(-1, 2).min(axis=0)
            assert np.allclose(cmin.values[0, 2 * ci : 2 * ci + 2], expected)

    def test_unknown_layout(self, rng):
        protos = self._protos(2, 1, rng)
        with pytest.raises(ConfigError):
            build_feature_matrix([protos[0].trace], protos, DistanceEngine(["euclidean"]), layout="x")

    def test_sort_prototypes(self, rng):
        protos = self._protos(2, 2, rng)[::-1]
        ordered = sort_prototypes(protos)
        assert [(p.class_id, p.cluster_rank) for p in ordered] == [
            (0, 0), (0, 1), (1, 0), (1, 1),
        ]


class TestThreshold:
    def test_separable_two_class_is_perfect(self):
        train = separable_two_class()
        test = separable_two_class(rng=np.random.default_rng(99))
        model = train_threshold(train, quantile=0.95, open_world=False)
        pred = predict_matrix(model, test)
        assert (pred == test.labels).mean() == 1.0

    def test_quantile_one_covers_training_rows(self):
        train = separable_two_class()
        model = train_threshold(train, quantile=1.0, open_world=True)
        for row, label in zip(train.values, train.labels):
            got, scores = model.predict(row)
            assert got == label

    def test_open_world_rejection(self):
        train = separable_two_class()
        model = train_threshold(train, quantile=0.95, open_world=True)
        far = np.array([500.0, 900.0])
        assert model.predict(far)[0] == UNMONITORED
        closed = train_threshold(train, quantile=0.95, open_world=False)
        assert closed.predict(far)[0] in (0, 1)

    def test_scale_consistency(self):
        rng = np.random.default_rng(3)
        train = separable_two_class(rng=rng)
        test = separable_two_class(rng=np.random.default_rng(4))
        base_model = train_threshold(train, open_world=False)
        base_pred = predict_matrix(base_model, test)

        k = 37.5
        scaled_train = toy_matrix(train.values * k, train.labels, [0, 1])
        scaled_test = toy_matrix(test.values * k, test.labels, [0, 1])
        scaled_model = train_threshold(scaled_train, open_world=False)
        assert np.array_equal(predict_matrix(scaled_model, scaled_test), base_pred)

    def test_insufficient_training_rows(self):
        matrix = toy_matrix([[0.1, 5.0], [5.0, 0.1], [5.1, 0.2]], [0, 1, 1], [0, 1])
        with pytest.raises(InsufficientData):
            train_threshold(matrix)

    def test_majority_of_measures_required(self):
        # two measures: both must be under threshold (majority of 2 is 2)
        rows = [[1.0, 1.0, 9.0, 9.0]] * 3 + [[9.0, 9.0, 1.0, 1.0]] * 3
        train = toy_matrix(rows, [0, 0, 0, 1, 1, 1], [0, 1], measures=("matrix_profile", "euclidean"))
        model = train_threshold(train, quantile=1.0, open_world=True)
        mixed = np.array([1.0, 9.0, 9.0, 9.0])  # only one measure under class-0 threshold
        assert model.predict(mixed)[0] == UNMONITORED

    def test_serialization_round_trip(self):
        train = separable_two_class()
        model = train_threshold(train)
        again = load_model(model.to_json())
        row = train.values[0]
        assert again.predict(row) == model.predict(row)


class TestGbdt:
    def test_separable_training_accuracy(self):
        train = separable_two_class()
        model = train_gbdt(train, GbdtHyperParams(n_rounds=50, max_depth=3))
        pred = predict_matrix(model, train)
        assert (pred == train.labels).mean() == 1.0

    def test_deterministic_bit_identical(self):
        train = separable_two_class()
        a = train_gbdt(train, GbdtHyperParams(n_rounds=20, max_depth=3))
        b = train_gbdt(train, GbdtHyperParams(n_rounds=20, max_depth=3))
        assert a.to_json() == b.to_json()

    def test_beats_stump_baseline_on_three_class_fixture(self):
        rng = np.random.default_rng(12)
        train = gaussian_three_class(30, rng)
        test = gaussian_three_class(15, np.random.default_rng(13))
        model = train_gbdt(train, GbdtHyperParams(n_rounds=60, max_depth=3))
        acc = (predict_matrix(model, test) == test.labels).mean()
        assert acc >= stump_baseline(train, test)

    def test_training_loss_non_increasing(self):
        rng = np.random.default_rng(14)
        train = gaussian_three_class(25, rng)
        model = train_gbdt(train, GbdtHyperParams(n_rounds=40, max_depth=3))
        losses = np.array(model.train_loss)
        assert losses.size == 40
        assert np.all(np.diff(losses) <= 1e-12)

    def test_degenerate_labels(self):
        matrix = toy_matrix([[0.1], [0.2], [0.3]], [0, 0, 0], [0])
        with pytest.raises(DegenerateLabels):
            train_gbdt(matrix, GbdtHyperParams(n_rounds=2))

    def test_subsample_requires_rng_and_is_seeded(self):
        train = separable_two_class()
        params = GbdtHyperParams(n_rounds=10, max_depth=2, subsample=0.8)
        with pytest.raises(ConfigError):
            train_gbdt(train, params)
        a = train_gbdt(train, params, rng=np.random.default_rng(5))
        b = train_gbdt(train, params, rng=np.random.default_rng(5))
        assert a.to_json() == b.to_json()

    def test_serialization_and_schema_guard(self):
        train = separable_two_class()
        model = train_gbdt(train, GbdtHyperParams(n_rounds=10, max_depth=2))
        again = load_model(model.to_json())
        row = train.values[0]
        assert again.predict(row) == model.predict(row)
        with pytest.raises(SchemaMismatch):
            predict(again, row, schema_hash="other")
        other = toy_matrix(train.values, train.labels, [0, 1], schema="other")
        with pytest.raises(SchemaMismatch):
            predict_matrix(again, other)

    def test_row_length_guard(self):
        train = separable_two_class()
        model = train_gbdt(train, GbdtHyperParams(n_rounds=5, max_depth=2))
        with pytest.raises(LengthMismatch):
            model.predict(np.zeros(7))

    def test_open_world_unmonitored_class(self):
        rng = np.random.default_rng(8)
        rows, labels = [], []
        for cid in (0, 1):
            for _ in range(10):
                row = rng.normal(5.0, 0.2, size=2)
                row[cid] = rng.normal(1.0, 0.2)
                rows.append(row)
                labels.append(cid)
        for _ in range(10):
            rows.append(rng.normal(5.0, 0.2, size=2))
            labels.append(UNMONITORED)
        matrix = toy_matrix(np.abs(rows), labels, [0, 1])
        model = train_gbdt(matrix, GbdtHyperParams(n_rounds=40, max_depth=3))
        assert UNMONITORED in model.classes
        label, _ = model.predict(np.array([6.0, 6.0]))
        assert label == UNMONITORED


class TestTieBreakAndBaselines:
    def test_equal_scores_pick_lowest_class(self):
        assert _label_from_scores({2: 0.2, 0: 0.2, 1: 0.2}) == 0
        assert _label_from_scores({UNMONITORED: 0.5, 3: 0.5}) == UNMONITORED

    def test_decision_tree_and_forest_fit_separable(self):
        train = separable_two_class()
        dt = train_classifier("decision_tree", train)
        rf = train_classifier("random_forest", train, rng=np.random.default_rng(0), n_trees=15)
        for model in (dt, rf):
            pred = predict_matrix(model, train)
            assert (pred == train.labels).mean() == 1.0
            again = load_model(model.to_json())
            assert again.predict(train.values[0]) == model.predict(train.values[0])

    def test_forest_requires_rng(self):
        with pytest.raises(ConfigError):
            train_classifier("random_forest", separable_two_class())

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            train_classifier("cnn", separable_two_class())
