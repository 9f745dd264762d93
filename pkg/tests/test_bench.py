"""Tests for the Monte Carlo bench harness, config schema, and plotting."""

import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mtmusic.bench import (
    DEFAULT_GRID_STEP_DEG,
    DEFAULT_MASTER_SEED,
    DEFAULT_TRIALS,
    FULL_FIDELITY_GRID_STEP_DEG,
    FULL_FIDELITY_TRIALS,
    PRESET_NAMES,
    REPORT_HEADER,
    BenchConfig,
    BenchReport,
    BenchRow,
    ScenarioSpec,
    SchemaError,
    UnknownPresetError,
    config_from_dict,
    distinct_trial_seeds,
    parse_config,
    preset,
    read_report_csv,
    run_bench,
    write_report_csv,
)
from mtmusic.estimators import UnknownEstimatorError
from mtmusic.influence import IfCurve
from mtmusic.plotting import EmptyReportError, render_influence_plot, render_plot
from mtmusic.simulate import NoiseConfig, SourceConfig, UlaGeometry


def tiny_config(**overrides):
    scenario = ScenarioSpec(
        geometry=UlaGeometry(6, 0.5),
        sources=SourceConfig(doas_deg=(-10.0, 15.0)),
        noise=NoiseConfig(family="gaussian"),
        gsnr_grid_db=(10.0,),
        n_grid=(200,),
        trials=3,
        master_seed=77,
    )
    defaults = dict(
        scenario=scenario,
        estimators=("scm", "mt-gauss"),
        grid_step_deg=0.5,
    )
    defaults.update(overrides)
    return BenchConfig(**defaults)


class TestPresets:
    def test_catalogue(self):
        assert len(PRESET_NAMES) == 8
        assert "noncoherent-gauss" in PRESET_NAMES
        assert "coherent-ig01" in PRESET_NAMES

    def test_noncoherent_shape(self):
        cfg = preset("noncoherent-gauss")
        assert cfg.scenario.geometry.num_sensors == 16
        assert cfg.scenario.sources.doas_deg == (-10.0, 0.0, 5.0, 15.0, 35.0)
        assert not cfg.scenario.sources.coherent
        assert cfg.smoothing is None
        assert cfg.scenario.n_grid == (1000,)
        assert cfg.scenario.trials == DEFAULT_TRIALS
        assert cfg.scenario.master_seed == DEFAULT_MASTER_SEED
        assert cfg.grid_step_deg == DEFAULT_GRID_STEP_DEG

    def test_noncoherent_gauss_sweep_centered(self):
        cfg = preset("noncoherent-gauss")
        assert cfg.scenario.gsnr_grid_db == (-17.0, -14.0, -11.0, -8.0, -5.0)

    def test_coherent_shape(self):
        cfg = preset("coherent-ig01")
        assert cfg.scenario.geometry.num_sensors == 22
        assert cfg.scenario.sources.doas_deg == (-17.0, -3.0, 2.0, 13.0, 20.0)
        assert cfg.scenario.sources.coherent
        assert cfg.smoothing is not None
        assert cfg.smoothing.subarray_size == 16
        assert cfg.scenario.noise.family == "inverse-gaussian"
        assert cfg.scenario.noise.shape == pytest.approx(0.1)

    def test_heavy_tail_centers_sit_lower(self):
        gauss = preset("noncoherent-gauss").scenario.gsnr_grid_db[2]
        ig = preset("noncoherent-ig01").scenario.gsnr_grid_db[2]
        assert ig < gauss

    def test_unknown_preset(self):
        with pytest.raises(UnknownPresetError):
            preset("noncoherent-laplace")
        with pytest.raises(UnknownPresetError):
            preset("bogus")

    def test_full_fidelity_constants(self):
        assert FULL_FIDELITY_TRIALS == 10_000
        assert FULL_FIDELITY_GRID_STEP_DEG == pytest.approx(0.0018)


class TestConfigSchema:
    def base_doc(self):
        return {
            "schema": 1,
            "scenario": {
                "geometry": {"num_sensors": 6},
                "sources": {"doas_deg": [-10.0, 15.0]},
                "noise": {"family": "gaussian"},
                "gsnr_grid_db": [0.0, 10.0],
                "n_grid": [200],
                "trials": 5,
                "master_seed": 3,
            },
            "estimators": ["scm", "mt-gauss"],
        }

    def test_full_document(self):
        cfg = config_from_dict(self.base_doc())
        assert cfg.scenario.geometry.num_sensors == 6
        assert cfg.scenario.gsnr_grid_db == (0.0, 10.0)
        assert cfg.scenario.trials == 5
        assert cfg.estimators == ("scm", "mt-gauss")
        assert cfg.smoothing is None

    def test_schema_version_required(self):
        doc = self.base_doc()
        del doc["schema"]
        with pytest.raises(SchemaError):
            config_from_dict(doc)
        doc["schema"] = 2
        with pytest.raises(SchemaError):
            config_from_dict(doc)

    def test_missing_field_names_path(self):
        doc = self.base_doc()
        del doc["scenario"]["noise"]
        with pytest.raises(SchemaError) as err:
            config_from_dict(doc)
        assert "noise" in str(err.value)

    def test_preset_scenario_with_overrides(self):
        doc = {
            "schema": 1,
            "scenario": "coherent-gauss",
            "trials": 7,
            "n_grid": [250, 500],
            "gsnr_grid_db": [-5.0],
            "master_seed": 99,
        }
        cfg = config_from_dict(doc)
        assert cfg.scenario.trials == 7
        assert cfg.scenario.n_grid == (250, 500)
        assert cfg.scenario.gsnr_grid_db == (-5.0,)
        assert cfg.scenario.master_seed == 99
        # the preset's smoothing setting rides along
        assert cfg.smoothing is not None and cfg.smoothing.subarray_size == 16

    def test_preset_smoothing_can_be_cleared(self):
        doc = {"schema": 1, "scenario": "coherent-gauss", "smoothing": None}
        assert config_from_dict(doc).smoothing is None

    def test_explicit_smoothing(self):
        doc = self.base_doc()
        doc["smoothing"] = {"subarray_size": 4}
        assert config_from_dict(doc).smoothing.subarray_size == 4

    def test_tau_selection_overrides(self):
        doc = self.base_doc()
        doc["tau_selection"] = {"c": 3.0, "max_iters": 50}
        cfg = config_from_dict(doc)
        assert cfg.tau_selection.c == 3.0
        assert cfg.tau_selection.max_iters == 50
        assert cfg.tau_selection.rel_tol == 1e-6

    def test_unknown_estimator(self):
        doc = self.base_doc()
        doc["estimators"] = ["scm", "huber"]
        with pytest.raises(UnknownEstimatorError):
            config_from_dict(doc)

    def test_empty_estimators(self):
        doc = self.base_doc()
        doc["estimators"] = []
        with pytest.raises(SchemaError):
            config_from_dict(doc)

    def test_attenuations_as_pairs(self):
        doc = self.base_doc()
        doc["scenario"]["sources"] = {
            "doas_deg": [-10.0, 15.0],
            "attenuations": [[1.0, 0.0], [0.0, 0.8]],
        }
        cfg = config_from_dict(doc)
        assert cfg.scenario.sources.attenuations == (1.0 + 0.0j, 0.8j)

    def test_parse_config_file(self, tmp_path):
        path = tmp_path / "bench.json"
        path.write_text(json.dumps(self.base_doc()))
        cfg = parse_config(path)
        assert cfg.scenario.master_seed == 3

    def test_parse_config_bad_json(self, tmp_path):
        path = tmp_path / "bench.json"
        path.write_text("{not json")
        with pytest.raises(SchemaError):
            parse_config(path)


class TestRunBench:
    def test_small_sweep_statistics(self):
        report = run_bench(tiny_config())
        assert len(report.rows) == 2
        by_est = {row.estimator: row for row in report.rows}
        for row in report.rows:
            assert row.trials == 3
            assert row.excluded == 0
            assert row.n_snapshots == 200
            assert row.gsnr_db == 10.0
            # 10 dB, well-separated sources: everything resolves cleanly
            assert row.avg_rmse_deg < 0.5
            assert row.order_error_rate == 0.0
        assert by_est["scm"].mean_tau == 0.0
        assert by_est["scm"].mean_iterations == 0.0
        assert by_est["mt-gauss"].mean_tau > 0.0
        assert by_est["mt-gauss"].mean_iterations >= 1.0

    def test_row_order_estimator_major(self):
        cfg = tiny_config()
        cfg = BenchConfig(
            scenario=ScenarioSpec(
                geometry=cfg.scenario.geometry,
                sources=cfg.scenario.sources,
                noise=cfg.scenario.noise,
                gsnr_grid_db=(0.0, 10.0),
                n_grid=(100, 200),
                trials=1,
                master_seed=5,
            ),
            estimators=("scm", "sign"),
            grid_step_deg=1.0,
        )
        report = run_bench(cfg)
        keys = [(r.estimator, r.gsnr_db, r.n_snapshots) for r in report.rows]
        assert keys == [
            ("scm", 0.0, 100),
            ("scm", 0.0, 200),
            ("scm", 10.0, 100),
            ("scm", 10.0, 200),
            ("sign", 0.0, 100),
            ("sign", 0.0, 200),
            ("sign", 10.0, 100),
            ("sign", 10.0, 200),
        ]

    def test_worker_count_does_not_change_results(self):
        cfg = tiny_config()
        serial = run_bench(cfg, workers=1)
        parallel = run_bench(cfg, workers=2)
        assert serial == parallel

    def test_coherent_smoothed_pipeline(self):
        cfg = BenchConfig(
            scenario=ScenarioSpec(
                geometry=UlaGeometry(8, 0.5),
                sources=SourceConfig(doas_deg=(-15.0, 20.0), attenuations=(1.0, 0.8j)),
                noise=NoiseConfig(family="gaussian"),
                gsnr_grid_db=(10.0,),
                n_grid=(500,),
                trials=2,
                master_seed=21,
            ),
            estimators=("mt-gauss",),
            grid_step_deg=0.5,
            smoothing=__import__("mtmusic").SmoothingConfig(subarray_size=6),
        )
        report = run_bench(cfg)
        row = report.rows[0]
        assert row.excluded == 0
        assert row.avg_rmse_deg < 1.0
        assert row.order_error_rate == 0.0

    def test_distinct_trial_seeds(self):
        cfg = tiny_config()
        seeds = distinct_trial_seeds(cfg)
        assert len(seeds) == 3
        assert len(set(seeds)) == 3
        assert all(s[0] == 77 for s in seeds)

    def test_seed_count_scales_with_cells(self):
        cfg = tiny_config()
        wide = BenchConfig(
            scenario=ScenarioSpec(
                geometry=cfg.scenario.geometry,
                sources=cfg.scenario.sources,
                noise=cfg.scenario.noise,
                gsnr_grid_db=(0.0, 5.0, 10.0),
                n_grid=(100, 200),
                trials=4,
                master_seed=77,
            ),
            estimators=("scm",),
        )
        seeds = distinct_trial_seeds(wide)
        assert len(seeds) == 3 * 2 * 4
        assert len(set(seeds)) == len(seeds)


class TestReportCsv:
    def make_report(self):
        return BenchReport(
            rows=(
                BenchRow("scm", -11.0, 1000, 1.2345678901234567, 0.25, 0.0, 0.0, 0, 4),
                BenchRow("mt-gauss", -11.0, 1000, 0.0625, 0.0, 11.59, 9.5, 1, 4),
                BenchRow("tyler", -17.0, 250, float("nan"), float("nan"), 0.0, 0.0, 4, 4),
            )
        )

    def test_header_constant(self):
        assert REPORT_HEADER == (
            "estimator,gsnr_db,n,avg_rmse_deg,order_error_rate,"
            "mean_tau,mean_iterations,excluded,trials"
        )

    def test_roundtrip_exact(self, tmp_path):
        report = self.make_report()
        path = tmp_path / "bench.csv"
        write_report_csv(report, path)
        back = read_report_csv(path)
        assert len(back.rows) == 3
        for a, b in zip(report.rows, back.rows):
            assert a.estimator == b.estimator
            assert a.gsnr_db == b.gsnr_db
            assert a.n_snapshots == b.n_snapshots
            # repr round-trips floats bit for bit; nan compares via isnan
            for field in ("avg_rmse_deg", "order_error_rate", "mean_tau", "mean_iterations"):
                x, y = getattr(a, field), getattr(b, field)
                assert (math.isnan(x) and math.isnan(y)) or x == y
            assert a.excluded == b.excluded
            assert a.trials == b.trials

    def test_header_written_first(self, tmp_path):
        path = tmp_path / "bench.csv"
        write_report_csv(self.make_report(), path)
        assert path.read_text().splitlines()[0] == REPORT_HEADER

    def test_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(SchemaError):
            read_report_csv(path)


class TestPlotting:
    def make_report(self):
        rows = []
        for est in ("scm", "mt-gauss"):
            for gsnr in (-17.0, -14.0, -11.0):
                rmse = 10.0 if est == "scm" else 0.1
                rows.append(BenchRow(est, gsnr, 1000, rmse, 0.5, 0.0, 0.0, 0, 10))
        return BenchReport(rows=tuple(rows))

    def test_rmse_plot_is_valid_svg(self, tmp_path):
        path = tmp_path / "rmse.svg"
        render_plot(self.make_report(), "rmse", path)
        root = ET.parse(path).getroot()
        assert root.tag.endswith("svg")

    def test_order_error_plot(self, tmp_path):
        path = tmp_path / "order.svg"
        render_plot(self.make_report(), "order_error", path)
        assert ET.parse(path).getroot().tag.endswith("svg")

    def test_plot_bytes_deterministic(self, tmp_path):
        a = tmp_path / "a.svg"
        b = tmp_path / "b.svg"
        render_plot(self.make_report(), "rmse", a)
        render_plot(self.make_report(), "rmse", b)
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_metric(self, tmp_path):
        with pytest.raises(ValueError):
            render_plot(self.make_report(), "bias", tmp_path / "x.svg")

    def test_empty_report(self, tmp_path):
        with pytest.raises(EmptyReportError):
            render_plot(BenchReport(rows=()), "rmse", tmp_path / "x.svg")

    def test_influence_plot(self, tmp_path):
        curve = IfCurve(
            norms=np.array([0.5, 1.0, 2.0]),
            if_fro={"scm": np.array([1.0, 1.0, 9.0]), "sign": np.array([0.4, 0.5, 0.6])},
        )
        path = tmp_path / "influence.svg"
        render_influence_plot(curve, path)
        assert ET.parse(path).getroot().tag.endswith("svg")
