"""
运行时核心测试：随机数流、进程池、报告、绘图数据与实验编排
"""

import json

import numpy as np
import pandas as pd
import pytest

from shadowlab.config import get_recipe
from shadowlab.core import SeedStream, WorkerPool
from shadowlab.core.experiment import run_experiment, stage, summarize
from shadowlab.core.plotting import emit_all, emit_plot_data, plot_table, side_map_table
from shadowlab.core.reports import (
    SCHEMA_VERSION,
    ExperimentReport,
    canonical_json,
    load_report,
    recheck_report,
    to_jsonable,
    write_report,
)
from shadowlab.errors import ConfigurationError, DomainError, StageError
from shadowlab.tracing import Reparametrization


def _square(x):
    return x * x


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    report = run_experiment(get_recipe("smoke"), out_dir=out)
    return report, out


class TestSeedStream:
    def test_same_key_same_sequence(self):
        a = SeedStream(7).spawn("chain").random(5)
        b = SeedStream(7).spawn("chain").random(5)
        np.testing.assert_array_equal(a, b)

    def test_keys_are_independent_of_order(self):
        first = SeedStream(7)
        first.spawn("a")
        x = first.spawn("b").random(3)
        y = SeedStream(7).spawn("b").random(3)
        np.testing.assert_array_equal(x, y)
        assert not np.array_equal(SeedStream(7).spawn("a").random(3), y)

    def test_describe_and_integer_seed(self):
        stream = SeedStream(3)
        stream.spawn("z")
        stream.spawn("a")
        stream.spawn("z")
        assert stream.describe() == {"seed": 3, "generator": "Philox", "keys": ["a", "z"]}
        assert stream.integer_seed("k") == SeedStream(3).integer_seed("k")
        assert isinstance(stream.integer_seed("k"), int)

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            SeedStream(-1)


class TestWorkerPool:
    def test_sequential_map_preserves_order(self):
        assert WorkerPool(1).map_ordered(_square, [3, 1, 2]) == [9, 1, 4]

    def test_rejects_zero_workers(self):
        with pytest.raises(ValueError):
            WorkerPool(0)

    def test_repr(self):
        assert repr(WorkerPool(2)) == "WorkerPool(workers=2, backend='loky')"


class TestReports:
    def test_to_jsonable(self):
        data = to_jsonable({"a": np.float64(1.5), "b": np.array([1, 2]), "c": float("nan"), 1: np.bool_(True)})
        assert data == {"a": 1.5, "b": [1, 2], "c": None, "1": True}
        assert canonical_json({"b": 1, "a": [np.inf]}) == '{"a":[null],"b":1}'

    def test_status(self):
        report = ExperimentReport(experiment="hyperbolic-control", config={})
        assert report.status == "ok"
        report.add_claim("traced", False, untraced_deltas=[0.01])
        assert report.status == "claims-failed"
        assert report.claims[0]["untraced_deltas"] == [0.01]
        report.traces.append({"delta": 0.01, "verdict": {"inconclusive": True}})
        assert report.status == "inconclusive"

    def test_digest_ignores_timings(self):
        a = ExperimentReport(experiment="x", config={"seed": 1}, timings={"setup": 0.1})
        b = ExperimentReport(experiment="x", config={"seed": 1}, timings={"setup": 9.0})
        assert a.body_digest() == b.body_digest()
        b.config["seed"] = 2
        assert a.body_digest() != b.body_digest()

    def test_round_trip(self, tmp_path):
        report = ExperimentReport(experiment="x", config={"seed": 1}, budget={"traces": 2})
        report.add_claim("holds", True)
        path = write_report(report, tmp_path / "out" / "report.json")
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["schema_version"] == SCHEMA_VERSION
        assert data["body_digest"] == report.body_digest()
        loaded = load_report(path)
        assert loaded.to_dict() == report.to_dict()

    def test_tampered_report(self, tmp_path):
        path = write_report(ExperimentReport(experiment="x", config={}), tmp_path / "report.json")
        data = json.loads(path.read_text(encoding="utf-8"))
        data["experiment"] = "y"
        path.write_text(json.dumps(data), encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_report(path)

    def test_wrong_version_and_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            ExperimentReport.from_dict({"schema_version": "0.1", "experiment": "x"})
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_report(bad)


class TestPlotting:
    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            plot_table(ExperimentReport(experiment="x", config={}), "pie-chart")

    def test_side_map_and_path_handling(self, tmp_path):
        report = ExperimentReport(experiment="x", config={})
        report.sides.append({"point": [1.0, 2.0, 3.0], "verdict": "side", "component": 1, "label": "q"})
        table = side_map_table(report)
        assert table.to_dict("records") == [
            {"label": "q", "x": 1.0, "y": 2.0, "z": 3.0, "verdict": "side", "component": 1}
        ]
        assert emit_plot_data(report, "side-map", tmp_path) == tmp_path / "side-map.csv"
        target = tmp_path / "nested" / "sides.csv"
        assert emit_plot_data(report, "side-map", target) == target
        assert len(pd.read_csv(target)) == 1

    def test_empty_tables_keep_columns(self, tmp_path):
        report = ExperimentReport(experiment="x", config={})
        paths = emit_all(report, ["branches", "growth", "error-vs-delta"], tmp_path)
        assert [p.name for p in paths] == ["branches.csv", "growth.csv", "error-vs-delta.csv"]
        growth = pd.read_csv(tmp_path / "growth.csv")
        assert growth.empty
        assert "domination_gap" in growth.columns


class TestStage:
    def test_records_time(self):
        timings = {}
        with stage("setup", timings):
            pass
        assert timings["setup"] >= 0.0

    def test_wraps_errors(self):
        timings = {}
        with pytest.raises(StageError) as info:
            with stage("verify-trace", timings):
                raise DomainError("t 超出范围")
        assert info.value.stage == "verify-trace"
        assert isinstance(info.value.error, DomainError)
        assert info.value.exit_code == 3
        assert "verify-trace" in timings

    def test_nested_stage_error_passes_through(self):
        with pytest.raises(StageError) as info:
            with stage("outer"):
                with stage("inner"):
                    raise ConfigurationError("bad")
        assert info.value.stage == "inner"
        assert info.value.exit_code == 2


class TestSmokeExperiment:
    def test_report_and_plot_data(self, smoke_run):
        report, out = smoke_run
        assert report.experiment == "hyperbolic-control"
        assert report.status in {"ok", "claims-failed"}
        assert [t["delta"] for t in report.traces] == [1e-2, 1e-3]
        assert report.budget["traces"] == 2
        assert report.generator["rng"]["generator"] == "Philox"
        assert (out / "report.json").exists()
        assert (out / "error-vs-delta.csv").exists()
        distances = pd.read_csv(out / "trace-distance.csv")
        assert set(distances.columns) == {"trace", "delta", "t", "g", "distance"}
        summary = summarize(report)
        assert set(summary["claims"]) == {"traced", "error-non-increasing", "linear-in-delta"}

    def test_certificates_recheck(self, smoke_run):
        _, out = smoke_run
        results = recheck_report(load_report(out / "report.json"))
        assert results
        assert all(r["holds"] and r["in_class"] for r in results)

    def test_recheck_rejects_witness_outside_its_class(self, smoke_run):
        _, out = smoke_run
        report = load_report(out / "report.json")
        verdict = report.traces[0]["verdict"]
        verdict.update({"class": "strong", "eps_rep": 0.1, "best_g": Reparametrization.linear(3.0).to_dict()})
        first = recheck_report(report)[0]
        assert first["index"] == 0
        assert not first["in_class"]
        assert not first["holds"]

    def test_chain_seeds_come_from_the_run_stream(self, smoke_run):
        report, _ = smoke_run
        config = get_recipe("smoke")
        for trace in report.traces:
            key = f"chain/{trace['delta']!r}"
            assert isinstance(trace["chain"]["seed"], int)
            assert trace["chain"]["seed"] == SeedStream(config.seed).integer_seed(key)
            assert key in report.generator["rng"]["keys"]

    def test_runs_are_reproducible(self, smoke_run, tmp_path):
        report, _ = smoke_run
        again = run_experiment(get_recipe("smoke"), out_dir=tmp_path)
        assert again.body_digest() == report.body_digest()

    def test_invalid_config_is_rejected(self):
        config = get_recipe("smoke")
        config.workers = 0
        with pytest.raises(ConfigurationError):
            run_experiment(config)
