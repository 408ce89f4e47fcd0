from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from marketrel import cli, pipeline
from marketrel.backtest import read_trade_rows
from marketrel.evaluation import accuracy_report, read_evaluation, trial_stats
from marketrel.market_data import CohortSpec
from marketrel.transduction import GatewayError

from .workspace import make_workspace, tree_bytes


@pytest.fixture(scope="module")
def ws(tmp_path_factory) -> Path:
    return make_workspace(tmp_path_factory.mktemp("ws"), n_markets=60, trials=2)


def run_cli(*args: str) -> int:
    return cli.main(list(args))


class TestConfig:
    def test_from_toml_resolves_paths(self, ws):
        cfg = pipeline.RunConfig.from_toml(ws)
        assert Path(cfg.markets_path) == ws.parent / "markets.csv"
        assert cfg.trials == 2 and cfg.base_seed == 7
        assert [c.key for c in cfg.cohorts] == ["2025-04"]
        assert cfg.transduction.max_retries == 2
        assert cfg.trial_seed(1) == 8
        cfg.validate()

    def test_overrides(self, ws):
        cfg = pipeline.RunConfig.from_toml(ws).with_overrides(["2025-05", "2025-06"], 3, 100, None, "elsewhere")
        assert [c.month for c in cfg.cohorts] == ["May", "June"]
        assert (cfg.trials, cfg.base_seed, cfg.output_dir) == (3, 100, "elsewhere")

    @pytest.mark.parametrize(
        "field, value, message",
        [("trials", 0, "trials"), ("confidence_threshold", 0.7, "confidence_threshold"),
         ("markets_path", "/nonexistent.csv", "markets file")],
    )
    def test_validation(self, ws, field, value, message):
        cfg = pipeline.RunConfig.from_toml(ws)
        setattr(cfg, field, value)
        with pytest.raises(pipeline.ConfigError, match=message):
            cfg.validate()

    def test_unknown_key_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('[inputs]\nmarkets = "m.csv"\n[run]\nbogus = 1\n')
        with pytest.raises(pipeline.ConfigError):
            pipeline.RunConfig.from_toml(bad)

    def test_invalid_config_exit_status(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text('[inputs]\nmarkets = "missing.csv"\n[run]\ncohorts = ["2025-04"]\n')
        assert run_cli("run-all", "--config", str(bad), "--out", str(tmp_path / "o")) == 1
        assert "markets file not found" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()


@pytest.fixture(scope="module")
def out(ws, tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("run") / "out"
    assert run_cli("run-all", "--config", str(ws), "--out", str(out)) == 0
    return out


class TestRunAll:
    def test_layout(self, out):
        cohort = out / "2025-04"
        for t in ("00", "01"):
            tdir = cohort / t
            assert list((tdir / "clusters").glob("cluster_*.csv"))
            for rel in ("labels/labels.json", "discover/relations.json", "discover/errors.json",
                        "evaluate/evaluation.csv", "evaluate/accuracy_report.json", "graph/summary.json",
                        "backtest/trades.csv", "backtest/backtest_report.json"):
                assert (tdir / rel).is_file(), rel
        assert (cohort / "trial_stats.json").is_file()
        assert (cohort / "ingest" / "markets.csv").is_file()
        assert (out / "report.md").is_file() and (out / "run_manifest.json").is_file()

    def test_manifest(self, out):
        m = json.loads((out / "run_manifest.json").read_text())
        assert m["seeds"] == {"00": 7, "01": 8}
        assert m["fatal"] is False and "timings" not in m
        assert "report.md" in m["artifacts"]
        assert m["config"]["cohorts"] == ["2025-04"]

    def test_report_shape(self, out):
        text = (out / "report.md").read_text()
        for title in ("Cluster Accuracy (%)", "Overall Accuracy (%)", "Returns (%)", "Delay (days)"):
            assert f"## {title}" in text
            assert f"| {title} | 2025-04 |" in text
        for label, _ in pipeline.STAT_ROWS:
            assert text.count(f"| {label} |") == 4
        assert "## Sample" in text and "## Categories" in text

    def test_aggregate_recomputed_from_artifacts(self, out):
        cohort = out / "2025-04"
        overall = []
        for t in ("00", "01"):
            rep = accuracy_report(read_evaluation(cohort / t / "evaluate" / "evaluation.csv"))
            overall.append(100.0 * rep.overall_accuracy)
        stats = json.loads((cohort / "trial_stats.json").read_text())["stats"]
        assert stats["overall_accuracy"] == trial_stats(overall).to_dict()
        delays = sorted(
            float(r["resolution_gap_days"])
            for t in ("00", "01")
            for r in read_trade_rows(cohort / t / "backtest" / "trades.csv")
            if r["skip_reason"] != "LEADER_TIE"
        )
        assert stats["delay_days"] == trial_stats(delays).to_dict()

    def test_planted_accuracy_is_visible(self, out):
        stats = json.loads((out / "2025-04" / "trial_stats.json").read_text())["stats"]
        assert 50 < stats["overall_accuracy"]["mean"] < 90

    def test_report_verb_rerenders(self, ws, out, capsys):
        before = (out / "report.md").read_text()
        (out / "report.md").unlink()
        assert run_cli("report", "--config", str(ws), "--out", str(out)) == 0
        assert (out / "report.md").read_text() == before
        assert "## Delay (days)" in capsys.readouterr().out


class TestStandaloneVerbs:
    def test_stage_by_stage_matches_run_all(self, ws, tmp_path):
        full, staged = tmp_path / "full", tmp_path / "staged"
        assert run_cli("run-all", "--config", str(ws), "--out", str(full)) == 0
        for verb in ("ingest", "cluster", "discover", "evaluate", "backtest"):
            assert run_cli(verb, "--config", str(ws), "--out", str(staged)) == 0
        a, b = tree_bytes(full / "2025-04"), tree_bytes(staged / "2025-04")
        b.pop("ingest/load_report.json", None)
        a.pop("ingest/load_report.json", None)
        a.pop("trial_stats.json")
        assert a == b

    def test_single_trial_flag(self, ws, tmp_path):
        out = tmp_path / "o"
        assert run_cli("ingest", "--config", str(ws), "--out", str(out)) == 0
        assert run_cli("cluster", "--config", str(ws), "--out", str(out), "--trial", "1") == 0
        assert (out / "2025-04" / "01" / "clusters").is_dir()
        assert not (out / "2025-04" / "00").exists()

    def test_stage_without_inputs_fails_cleanly(self, ws, tmp_path, capsys):
        assert run_cli("cluster", "--config", str(ws), "--out", str(tmp_path / "empty")) == 1
        assert "ingest" in capsys.readouterr().err


class TestDeterminismAndDegradation:
    def test_repeat_runs_byte_identical(self, ws, tmp_path):
        out = tmp_path / "out"
        assert run_cli("run-all", "--config", str(ws), "--out", str(out)) == 0
        first = tree_bytes(out)
        shutil.rmtree(out)
        assert run_cli("run-all", "--config", str(ws), "--out", str(out)) == 0
        assert tree_bytes(out) == first

    def test_single_trial_marks_degenerate_std(self, ws, tmp_path):
        out = tmp_path / "out"
        assert run_cli("run-all", "--config", str(ws), "--out", str(out), "--trials", "1") == 0
        text = (out / "report.md").read_text()
        assert "0.0†" in text and "n=1" in text

    def test_unreachable_gateway_does_not_abort(self, ws, tmp_path):
        class Down:
            def complete(self, request):
                raise GatewayError("connection refused")

        cfg = pipeline.RunConfig.from_toml(ws).with_overrides(out=str(tmp_path / "out"))
        manifest = pipeline.run(cfg, gateway=Down())
        counts = manifest.errors["2025-04"]["00"]
        assert counts["gateway"] > 0 and not manifest.fatal
        assert "n/a" in (tmp_path / "out" / "report.md").read_text()

    def test_month_without_markets(self, ws, tmp_path):
        cfg = pipeline.RunConfig.from_toml(ws).with_overrides(["2025-11"], 1, out=str(tmp_path / "out"))
        pipeline.run(cfg)
        assert (tmp_path / "out" / "report.md").is_file()

    def test_timings_opt_in(self, ws, tmp_path):
        cfg = pipeline.RunConfig.from_toml(ws).with_overrides(trials=1, out=str(tmp_path / "out"))
        cfg.record_timings = True
        pipeline.run(cfg)
        m = json.loads((tmp_path / "out" / "run_manifest.json").read_text())
        assert set(m["timings"]) >= {"cluster", "discover", "evaluate", "backtest"}

    def test_layout_paths(self):
        layout = pipeline.Layout(Path("out"))
        assert layout.trial(CohortSpec.parse("2025-06"), 3) == Path("out/2025-06/03")
