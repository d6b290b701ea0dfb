import csv
import dataclasses
import json
import time

import numpy as np
import pytest

from coopsense import cli, harness
from coopsense.bga import GaConfig
from coopsense.detection import ScenarioSpec, statistics
from coopsense.fusion import Scheme, pd_given_pf
from coopsense.harness import ConfigError, ExperimentConfig, SweepConfig


def small_config(**kw):
    base = dict(
        scenario=ScenarioSpec(M=4, snr_db=(-20.0, -10.0)),
        realizations=3,
        pf_grid=(0.1, 0.5, 0.9),
        ga=GaConfig(M=4, pops=12, n_gener=15),
        seed=7,
        sweep=SweepConfig(repetitions=3, grids={"p_m": (0.01, 0.1)}),
        validate=harness.ValidateConfig(trials=2000, pf_points=(0.25, 0.75)),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.realizations == 1000 and cfg.scenario.sample_count == 300
        assert cfg.ga.M == cfg.scenario.M == 18
        assert list(cfg.pf_grid) == sorted(cfg.pf_grid)

    def test_ga_follows_scenario_size(self):
        assert ExperimentConfig(scenario=ScenarioSpec(M=5)).ga.M == 5

    @pytest.mark.parametrize("kw", [dict(realizations=0), dict(pf_grid=(0.5, 0.2)), dict(pf_grid=(0.0, 0.5)),
                                    dict(pf_grid=()), dict(schemes=()), dict(schemes=("EGC", "EGC")),
                                    dict(schemes=("XYZ",)), dict(reference_pf=1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)

    def test_dict_round_trip(self):
        cfg = small_config(schemes=("EGC", "NDC"), fast=True)
        again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg

    def test_from_dict_errors(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"bogus": 1})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"scenario": {"M": 3}, "ga": {"M": 4}})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"scenario": {"M": -1}})

    def test_load_config_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            harness.load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            harness.load_config(bad)
        bad.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            harness.load_config(bad)


class TestRoc:
    def test_single_realization_egc(self):
        cfg = small_config(realizations=1, schemes=("EGC",))
        (curve,) = harness.run_roc(cfg)
        assert curve.scheme is Scheme.EGC and curve.realizations == 1
        pds = [pd for _, pd in curve.points]
        assert len(pds) == 3 and pds[0] < pds[1] < pds[2]

    def test_deterministic_and_worker_independent(self):
        cfg = small_config(realizations=4)
        a = harness.run_roc(cfg)
        b = harness.run_roc(cfg)
        c = harness.run_roc(cfg, workers=2)
        for x, y, z in zip(a, b, c):
            assert x.pd_mean.tobytes() == y.pd_mean.tobytes() == z.pd_mean.tobytes()
            assert x.pd_stderr.tobytes() == z.pd_stderr.tobytes()

    def test_seed_changes_results(self):
        a = harness.run_roc(small_config(schemes=("NDC",)))
        b = harness.run_roc(small_config(schemes=("NDC",), seed=8))
        assert a[0].pd_mean.tobytes() != b[0].pd_mean.tobytes()

    def test_curves_monotone_for_every_scheme(self):
        cfg = small_config(realizations=5, pf_grid=(0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.95))
        for curve in harness.run_roc(cfg):
            assert np.all(np.diff(curve.pd_mean) >= -1e-12), curve.scheme
            assert np.all(curve.pd_mean >= curve.pf - 1e-12)

    def test_fast_mode_reuses_weights(self):
        cfg = small_config(schemes=("BGA",), fast=True, realizations=2)
        (fast,) = harness.run_roc(cfg)
        (slow,) = harness.run_roc(dataclasses.replace(cfg, fast=False))
        assert fast.pd_mean.shape == slow.pd_mean.shape == (3,)
        assert np.all(np.diff(fast.pd_mean) > 0)

    def test_realization_failure_carries_index(self, monkeypatch):
        original = harness.statistics

        def flaky(s):
            if s.g[0] == harness.scenario_for(cfg, 2).g[0]:
                raise FloatingPointError("boom")
            return original(s)

        cfg = small_config(realizations=4, schemes=("EGC",))
        monkeypatch.setattr(harness, "statistics", flaky)
        with pytest.raises(harness.RealizationError) as info:
            harness.run_roc(cfg)
        assert info.value.index == 2

    @pytest.mark.slow
    def test_ensemble_ordering_at_m6(self):
        cfg = ExperimentConfig(scenario=ScenarioSpec(M=6, snr_db=(-20.0, -10.0)), realizations=100,
                               pf_grid=(0.1, 0.25, 0.5), seed=1)
        pd = {c.scheme: c.pd_mean for c in harness.run_roc(cfg, workers=4)}
        order = [Scheme.BGA, Scheme.NDC, Scheme.MRC, Scheme.EGC, Scheme.OR_RULE]
        for hi, lo in zip(order, order[1:]):
            assert np.all(pd[hi] >= pd[lo] - 0.005), (hi, lo)
        assert np.all(pd[Scheme.NDC] >= pd[Scheme.MDC] - 0.01)

    def test_runtime_linear_in_realizations(self):
        cfg = small_config(schemes=("BGA", "NDC"), realizations=20, ga=GaConfig(M=4, pops=20, n_gener=30))
        harness.run_roc(dataclasses.replace(cfg, realizations=1))  # warm-up

        def timed(R):
            t0 = time.perf_counter()
            harness.run_roc(dataclasses.replace(cfg, realizations=R))
            return time.perf_counter() - t0

        ratio = min(timed(40) for _ in range(2)) / min(timed(20) for _ in range(2))
        assert 1.3 < ratio < 3.0


class TestConvergence:
    def test_rows(self):
        cfg = small_config()
        run = harness.run_convergence(cfg)
        rows = list(harness.convergence_rows(run))
        assert len(rows) == cfg.ga.n_gener
        assert [r["generation"] for r in rows] == list(range(1, cfg.ga.n_gener + 1))
        assert rows[-1]["best_fitness"] >= rows[0]["best_fitness"]

    def test_uses_realization_zero(self):
        cfg = small_config()
        run = harness.run_convergence(cfg)
        st_ = statistics(harness.scenario_for(cfg, 0))
        assert run.best_fitness == pytest.approx(pd_given_pf(run.best_weights, st_, cfg.ga.pf_target), abs=1e-12)


class TestSweep:
    def test_mutation_grid(self):
        grid = harness.DEFAULT_SWEEP_GRIDS["p_m"]
        rows = harness.run_param_sweep(small_config(), grids={"p_m": grid}, repetitions=2)
        assert len(rows) == 7 and [r.value for r in rows] == list(grid)
        assert all(0.0 <= r.mean_fitness <= 1.0 for r in rows)
        assert sum(r.is_argmax for r in rows) == 1
        argmax = harness.sweep_argmax(rows)
        assert set(argmax) == {"p_m"} and argmax["p_m"] in grid

    def test_all_parameters(self):
        grids = {"nbits": (2, 10), "pops": (10, 20), "p_c": (0.5, 0.95), "prep": (0.5, 0.9)}
        rows = harness.run_param_sweep(small_config(), grids=grids, repetitions=2)
        assert [r.parameter for r in rows] == ["nbits"] * 2 + ["pops"] * 2 + ["p_c"] * 2 + ["prep"] * 2
        assert set(harness.sweep_argmax(rows)) == set(grids)

    def test_grids_rejected(self):
        with pytest.raises(ValueError):
            harness.run_param_sweep(small_config(), grids={"p_m": ()})
        with pytest.raises(ValueError):
            harness.run_param_sweep(small_config(), grids={})
        with pytest.raises(ValueError):
            harness.run_param_sweep(small_config(), grids={"speed": (1,)})
        with pytest.raises(ConfigError):
            harness.run_param_sweep(small_config(), grids={"p_m": (2.0,)})


class TestValidation:
    def test_rows(self):
        cfg = small_config(validate=harness.ValidateConfig(trials=20_000, pf_points=(0.25, 0.75)))
        rows = harness.run_validation(cfg)
        assert len(rows) == 4 and {r["scheme"] for r in rows} == {"NDC", "EGC"}
        for r in rows:
            assert abs(r["pf_empirical"] - r["pf_analytic"]) < 0.02
            assert abs(r["pd_empirical"] - r["pd_analytic"]) < 0.02

    def test_rejects_non_linear_schemes(self):
        with pytest.raises(ValueError):
            harness.ValidateConfig(schemes=("BGA",))


class TestOutput:
    def test_roc_csv(self, tmp_path):
        (curve,) = harness.run_roc(small_config(realizations=1, schemes=("EGC",)))
        path = harness.emit_csv(curve.rows(), tmp_path / "a" / "roc.csv", harness.ROC_COLUMNS)
        text = path.read_bytes()
        assert text.endswith(b"\n") and len(text.decode("utf-8").splitlines()) == 4
        assert text.splitlines()[0] == b"scheme,pf,pd_mean,pd_stderr,realizations"
        again = harness.emit_csv(curve.rows(), tmp_path / "b.csv", harness.ROC_COLUMNS)
        assert again.read_bytes() == text
        parsed = read_csv(path)
        assert np.allclose([float(r["pd_mean"]) for r in parsed], curve.pd_mean, rtol=0, atol=1e-9)
        assert [r["scheme"] for r in parsed] == ["EGC"] * 3

    def test_cell_formatting(self, tmp_path):
        recs = [{"a": 1 / 3, "b": True, "c": 7, "d": Scheme.MRC}]
        path = harness.emit_csv(recs, tmp_path / "x.csv", ("a", "b", "c", "d"))
        assert path.read_text().splitlines()[1] == "0.333333333333,true,7,MRC"

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError, match="file"):
            harness.emit_csv([], blocker / "out.csv", ("a",))

    def test_metadata_reproduces_output(self, tmp_path):
        cfg = small_config(schemes=("EGC", "MDC"), seed=123)
        curves = harness.run_roc(cfg)
        path = harness.emit_csv((r for c in curves for r in c.rows()), tmp_path / "roc.csv", harness.ROC_COLUMNS)
        meta_path = harness.write_metadata(path, cfg, "roc")
        meta = json.loads(meta_path.read_text())
        assert meta_path.name == "roc.meta.json"
        assert meta["seed"] == 123 and meta["command"] == "roc"
        rebuilt = ExperimentConfig.from_dict(meta["config"])
        assert rebuilt == cfg
        redo = harness.run_roc(rebuilt)
        path2 = harness.emit_csv((r for c in redo for r in c.rows()), tmp_path / "roc2.csv", harness.ROC_COLUMNS)
        assert path2.read_bytes() == path.read_bytes()


class TestCli:
    def write_config(self, tmp_path, **kw):
        cfg = small_config(**kw)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        return path

    def test_scenario_prints_json(self, tmp_path, capsys):
        assert cli.main(["scenario", "--config", str(self.write_config(tmp_path)), "--seed", "3"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["seed"] == 3 and len(data["scenario"]["g"]) == 4

    def test_converge_writes_csv_and_metadata(self, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["converge", "--config", str(self.write_config(tmp_path)), "--out", str(out)]) == 0
        rows = read_csv(out / "converge.csv")
        assert len(rows) == 15
        meta = json.loads((out / "converge.meta.json").read_text())
        assert meta["config"]["seed"] == 7

    def test_missing_config_is_config_error(self, tmp_path):
        assert cli.main(["roc", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG

    def test_bad_override_is_config_error(self, tmp_path):
        cfg = self.write_config(tmp_path)
        assert cli.main(["roc", "--config", str(cfg), "--realizations", "0"]) == cli.EXIT_CONFIG
        assert cli.main(["sweep", "--config", str(cfg), "--repetitions", "0"]) == cli.EXIT_CONFIG

    def test_unwritable_output_is_io_error(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        cfg = self.write_config(tmp_path, schemes=("EGC",))
        assert cli.main(["roc", "--config", str(cfg), "--out", str(blocker / "sub")]) == cli.EXIT_IO

    def test_runtime_failure_exit_code(self, tmp_path, monkeypatch):
        def fail(cfg, workers=1):
            raise FloatingPointError("overflow")

        monkeypatch.setattr(harness, "run_roc", fail)
        assert cli.main(["roc", "--config", str(self.write_config(tmp_path))]) == cli.EXIT_RUNTIME
