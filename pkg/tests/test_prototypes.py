import numpy as np
import pytest

from tsawf.errors import DimensionMismatch, InsufficientData
from tsawf.features import features_matrix, standardize
from tsawf.prototypes import (
    Strategy,
    kmeans,
    load_prototypes,
    pad_raw,
    save_prototypes,
    select_all_prototypes,
    select_prototypes,
)
from tsawf.trace import to_signed_series

from conftest import trace_of
from synthdata import make_template, perturb


class TestKMeans:
    def test_k1_closed_form(self, rng):
        X = rng.normal(size=(40, 3))
        result = kmeans(X, 1, rng)
        assert np.allclose(result.centroids[0], X.mean(axis=0))
        expected_inertia = ((X - X.mean(axis=0)) ** 2).sum()
        assert result.inertia == pytest.approx(expected_inertia)

    def test_two_separated_clouds(self, rng):
        a = rng.normal(size=(30, 2))
        b = rng.normal(size=(30, 2)) + 100.0
        X = np.vstack([a, b])
        result = kmeans(X, 2, rng)
        first_half = set(result.assignments[:30].tolist())
        second_half = set(result.assignments[30:].tolist())
        assert len(first_half) == 1 and len(second_half) == 1
        assert first_half != second_half

    def test_k_equals_n(self, rng):
        X = rng.normal(size=(6, 4))
        result = kmeans(X, 6, rng)
        assert result.inertia == pytest.approx(0.0, abs=1e-18)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            kmeans([[1.0, 2.0], [1.0]], 1, rng)

    def test_too_few_points(self, rng):
        with pytest.raises(InsufficientData):
            kmeans(np.ones((2, 2)), 3, rng)

    def test_inertia_non_increasing_on_fixture(self, rng):
        # the in-loop assert fires on violation; run enough shapes to exercise it
        for _ in range(10):
            X = rng.normal(size=(rng.integers(8, 40), rng.integers(1, 6)))
            kmeans(X, int(rng.integers(1, 5)), rng)

    def test_duplicate_points_terminate(self, rng):
        X = np.zeros((5, 2))
        result = kmeans(X, 2, rng)
        assert result.inertia == 0.0


class TestPadRaw:
    def test_pad_and_truncate(self):
        short = trace_of((1.0, 1), (2.0, -1))
        long = trace_of((1.0, 1), (2.0, -1), (3.0, 1), (4.0, 1))
        X = pad_raw([short, long], 3)
        assert X.shape == (2, 3)
        assert X[0].tolist() == [1.0, -2.0, 0.0]
        assert X[1].tolist() == [1.0, -2.0, 3.0]

    def test_identity_when_exact(self):
        t = trace_of((1.0, 1), (2.0, -1), (3.0, 1))
        X = pad_raw([t], 3)
        assert np.array_equal(X[0], to_signed_series(t))


class TestSelection:
    def _class_traces(self, rng, n=12, n_events=60, label=0):
        template = make_template(rng, n_events=n_events, label=label)
        return [perturb(template, rng, source_id=f"s{i}") for i in range(n)]

    def test_random_reproducible(self, rng):
        traces = self._class_traces(rng)
        a = select_prototypes(traces, Strategy.RANDOM, 3, np.random.default_rng(5))
        b = select_prototypes(traces, Strategy.RANDOM, 3, np.random.default_rng(5))
        assert [p.trace.source_id for p in a] == [p.trace.source_id for p in b]
        assert len({p.trace.source_id for p in a}) == 3

    def test_prototypes_are_members(self, rng):
        traces = self._class_traces(rng)
        for strategy in Strategy:
            protos = select_prototypes(traces, strategy, 2, np.random.default_rng(1))
            ids = {t.source_id for t in traces}
            assert all(p.trace.source_id in ids for p in protos)
            assert len({p.trace.source_id for p in protos}) == 2
            assert [p.cluster_rank for p in protos] == [0, 1]
            assert all(p.class_id == 0 for p in protos)

    def test_count_one_feature_cluster_is_nearest_global_mean(self, rng):
        traces = self._class_traces(rng, n=10)
        protos = select_prototypes(traces, Strategy.FEATURE_CLUSTER, 1, np.random.default_rng(2))
        Z = standardize(features_matrix(traces))
        nearest = int(((Z - Z.mean(axis=0)) ** 2).sum(axis=1).argmin())
        assert protos[0].trace.source_id == traces[nearest].source_id

    def test_separated_subpopulations_get_one_prototype_each(self, rng):
        # two template families inside one class label
        fast = make_template(np.random.default_rng(100), n_events=60, label=0)
        slow_times = fast.times * 50.0 + np.arange(len(fast)) * 5.0
        from tsawf.trace import Trace

        slow = Trace(slow_times, fast.dirs, label=0, source_id="slowT")
        traces = [perturb(fast, rng, source_id=f"fast{i}") for i in range(6)]
        traces += [perturb(slow, rng, source_id=f"slow{i}") for i in range(6)]
        protos = select_prototypes(traces, Strategy.FEATURE_CLUSTER, 2, np.random.default_rng(3))
        families = {p.trace.source_id[:4] for p in protos}
        assert families == {"fast", "slow"}

    def test_insufficient(self, rng):
        traces = self._class_traces(rng, n=2)
        with pytest.raises(InsufficientData):
            select_prototypes(traces, Strategy.RANDOM, 3, rng)

    def test_cluster_rank_orders_by_size(self, rng):
        big = make_template(np.random.default_rng(7), n_events=50, label=0)
        small_times = big.times * 20.0 + 3.0
        from tsawf.trace import Trace

        small = Trace(small_times, big.dirs, label=0, source_id="minor")
        traces = [perturb(big, rng, source_id=f"major{i}") for i in range(9)]
        traces += [perturb(small, rng, source_id=f"minor{i}") for i in range(3)]
        protos = select_prototypes(traces, Strategy.FEATURE_CLUSTER, 2, np.random.default_rng(4))
        assert protos[0].trace.source_id.startswith("major")
        assert protos[1].trace.source_id.startswith("minor")


class TestBundle:
    def test_save_load_round_trip(self, tmp_path, rng):
        train = {
            0: TestSelection()._class_traces(rng, label=0),
            1: [
                t.relabel(1, t.source_id)
                for t in TestSelection()._class_traces(rng, label=1)
            ],
        }
        protos = select_all_prototypes(train, Strategy.FEATURE_CLUSTER, 2, seed=11)
        save_prototypes(protos, tmp_path / "bundle", seed=11)
        loaded = load_prototypes(tmp_path / "bundle")
        assert len(loaded) == 4
        by_key = {(p.class_id, p.cluster_rank): p for p in loaded}
        for p in protos:
            q = by_key[(p.class_id, p.cluster_rank)]
            assert np.allclose(q.trace.times, p.trace.times)
            assert np.array_equal(q.trace.dirs, p.trace.dirs)
            assert q.strategy == p.strategy

    def test_per_class_streams_are_independent(self, rng):
        # adding a class must not change another class's prototypes
        base = {0: TestSelection()._class_traces(rng, label=0)}
        more = dict(base)
        more[1] = [t.relabel(1, t.source_id) for t in TestSelection()._class_traces(rng, label=1)]
        a = select_all_prototypes(base, Strategy.RANDOM, 2, seed=3)
        b = select_all_prototypes(more, Strategy.RANDOM, 2, seed=3)
        a_ids = [p.trace.source_id for p in a if p.class_id == 0]
        b_ids = [p.trace.source_id for p in b if p.class_id == 0]
        assert a_ids == b_ids
