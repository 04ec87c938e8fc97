import json
from pathlib import Path

import numpy as np
import pytest

from tsawf.errors import ConfigError
from tsawf.experiment import (
    CellResult,
    EvalReport,
    ExperimentConfig,
    read_predictions,
    run_experiment,
)

from synthdata import make_class_dataset, write_dataset


@pytest.fixture(scope="module")
def small_dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    ds = make_class_dataset(
        seed=77, n_classes=3, samples_per_class=8, n_events=60,
        n_unmonitored=12, unmon_events=50,
    )
    write_dataset(ds, root)
    return root


def small_config(dataset_dir, outdir, **overrides):
    base = dict(
        dataset=str(dataset_dir),
        output=str(outdir),
        seed=7,
        train_fraction=0.75,
        prototype_strategy="feature_cluster",
        prototype_count=2,
        measures=["matrix_profile"],
        classifier="threshold",
        tab_counts=[1],
        overlaps=[0.0],
        synth_train_per_class=4,
        synth_test_per_class=2,
    )
    base.update(overrides)
    return ExperimentConfig.from_dict(base)


class TestConfig:
    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"dataset": "x", "output": "y", "bogus": 1})

    def test_rejects_bad_measures(self):
        with pytest.raises(ConfigError):
            small_config("d", "o", measures=["nope"])

    def test_rejects_bad_tabs(self):
        with pytest.raises(ConfigError):
            small_config("d", "o", tab_counts=[0])

    def test_file_round_trip_with_overrides(self, tmp_path):
        cfg = small_config("d", "o")
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg.to_dict()))
        loaded = ExperimentConfig.from_file(path, {"seed": 99, "output": None})
        assert loaded.seed == 99
        assert loaded.output == "o"


class TestRun:
    def test_minimal_single_tab_run(self, small_dataset_dir, tmp_path):
        config = small_config(small_dataset_dir, tmp_path / "out")
        report = run_experiment(config)
        assert len(report.cells) == 1
        cell = report.cells[0]
        assert cell.tabs == 1
        assert 0.0 <= cell.accuracy <= 1.0
        assert (tmp_path / "out" / "report.json").exists()
        assert (tmp_path / "out" / "manifest.json").exists()
        assert (tmp_path / "out" / "timings.json").exists()

    def test_multitab_grid_and_location_curve(self, small_dataset_dir, tmp_path):
        config = small_config(
            small_dataset_dir, tmp_path / "out",
            tab_counts=[1, 3], overlaps=[0.0, 0.2],
            locate_n_grid=[0, 10, 1000],
        )
        report = run_experiment(config)
        cells = {(c.tabs, c.overlap) for c in report.cells}
        assert cells == {(1, 0.0), (3, 0.0), (3, 0.2)}
        multi = [c for c in report.cells if c.tabs == 3]
        for cell in multi:
            assert cell.location is not None
            assert cell.location["n"] == [0, 10, 1000]
            cond = cell.location["conditional"]
            assert cond == sorted(cond)

    def test_deterministic_reruns_are_byte_identical(self, small_dataset_dir, tmp_path):
        config_a = small_config(small_dataset_dir, tmp_path / "a", tab_counts=[1, 3])
        config_b = small_config(small_dataset_dir, tmp_path / "b", tab_counts=[1, 3])
        run_experiment(config_a)
        run_experiment(config_b)
        for name in ("predictions_t1_o0.csv", "predictions_t3_o0.csv", "locations_t3_o0.csv"):
            a = (tmp_path / "a" / name).read_bytes()
            b = (tmp_path / "b" / name).read_bytes()
            assert a == b, name
        ra = json.loads((tmp_path / "a" / "report.json").read_text())
        rb = json.loads((tmp_path / "b" / "report.json").read_text())
        ra["config"]["output"] = rb["config"]["output"] = ""
        assert ra == rb

    def test_resume_reuses_artifacts(self, small_dataset_dir, tmp_path):
        out = tmp_path / "out"
        config = small_config(small_dataset_dir, out)
        first = run_experiment(config)
        report_bytes = (out / "report.json").read_bytes()
        # wipe the final report but keep caches, model, and predictions
        (out / "report.json").unlink()
        second = run_experiment(config)
        assert (out / "report.json").read_bytes() == report_bytes
        assert first.cells[0].accuracy == second.cells[0].accuracy

    def test_report_accuracy_matches_csv(self, small_dataset_dir, tmp_path):
        config = small_config(small_dataset_dir, tmp_path / "out", classifier="gbdt",
                              gbdt={"n_rounds": 20, "max_depth": 3})
        report = run_experiment(config)
        _, truth, predicted = read_predictions(tmp_path / "out" / "predictions_t1_o0.csv")
        assert report.cells[0].accuracy == pytest.approx((truth == predicted).mean())
        confusion_total = sum(
            sum(row.values()) for row in report.cells[0].confusion.values()
        )
        assert confusion_total == truth.size

    def test_manifest_records_seeds_and_stride(self, small_dataset_dir, tmp_path):
        config = small_config(small_dataset_dir, tmp_path / "out", stride=2)
        run_experiment(config)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 7
        assert manifest["stride"] == 2
        assert "seed_derivation" in manifest
        assert manifest["kernel_backend"] in ("numba", "numpy")

    def test_open_world_single_tab(self, small_dataset_dir, tmp_path):
        config = small_config(
            small_dataset_dir, tmp_path / "out", open_world=True, classifier="threshold",
        )
        report = run_experiment(config)
        # unmonitored test traces enter the pool
        assert report.cells[0].n_test > 3

    def test_report_json_excludes_timings(self, small_dataset_dir, tmp_path):
        config = small_config(small_dataset_dir, tmp_path / "out")
        report = run_experiment(config)
        assert "timings" not in json.loads(report.to_json())
        assert report.timings  # still available in memory and in timings.json
