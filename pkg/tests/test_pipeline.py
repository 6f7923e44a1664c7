import json

import pandas as pd
import pytest

from cli import build_parser, main
from modules.pipeline.config import RunConfig, parse_config, parse_value
from modules.pipeline.runner import StageError, load_report, report, run_pipeline


def _manifest(run_dir):
    return json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))


def _timings(run_dir):
    return json.loads((run_dir / "timings.json").read_text(encoding="utf-8"))


class TestConfig:
    def test_values_take_the_default_type(self):
        config = parse_config("# comment\n\nrun.seeds = 3, 4\ntraining.learning_rate = 0.01\ngraph.lambda_search = true\n")
        assert config.seeds == [3, 4]
        assert config.get("training", "learning_rate") == 0.01
        assert config.get("graph", "lambda_search") is True
        assert config.get("model", "n_layers") == RunConfig().get("model", "n_layers")

    def test_parse_value_errors(self):
        assert parse_value("7", 1) == 7
        with pytest.raises(ValueError, match="expected a int, got 'x'"):
            parse_value("x", 1)
        with pytest.raises(ValueError, match="expected true or false"):
            parse_value("yes", False)

    @pytest.mark.parametrize("text,message", [
        ("run.name", "Line 1: expected 'section.key = value'"),
        ("name = x", "has no section prefix"),
        ("cache.size = 3", "unknown section 'cache'"),
        ("run.colour = red", "unknown key 'run.colour'"),
    ])
    def test_parse_errors(self, text, message):
        with pytest.raises(ValueError, match=message):
            parse_config(text)

    def test_hash_ignores_formatting(self):
        first = parse_config("run.name = a\npe.alpha = 2.0\n")
        second = parse_config("pe.alpha=2\n\n# same values\nrun.name =   a")
        assert first.canonical() == second.canonical()
        assert first.config_hash() == second.config_hash()
        assert first.config_hash() != parse_config("pe.alpha = 3").config_hash()

    def test_validate(self, tmp_path):
        with pytest.raises(ValueError, match="seeds must be nonempty"):
            parse_config("run.seeds =").validate()
        with pytest.raises(ValueError, match="Data file not found"):
            parse_config(f"data.path = {tmp_path / 'absent.csv'}\ndata.target = y").validate()
        with pytest.raises(ValueError, match="Unknown config section"):
            RunConfig().set("cache", "size", 3)
        with pytest.raises(ValueError, match="Unknown config key"):
            RunConfig().set("run", "colour", "red")

    def test_output_root_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TABPET_OUTPUT_ROOT", str(tmp_path))
        config = parse_config("run.name = demo")
        assert config.run_dir() == tmp_path / f"demo-{config.config_hash()[:12]}"


class TestPipeline:
    def test_fixed_run_writes_every_artifact(self, tiny_run_config, tmp_path):
        run_dir = run_pipeline(tiny_run_config("fixed"), output_root=tmp_path)
        manifest = _manifest(run_dir)
        assert set(manifest["stages"]) == {"preprocess", "graph", "spectral", "train", "report"}
        assert all(entry["status"] == "done" for entry in manifest["stages"].values())
        for name in ("table.csv", "graph.csv", "graph_diagnostics.json", "spectrum.csv", "pe.csv",
                     "metrics.csv", "report.csv", "report.txt"):
            assert (run_dir / name).exists(), name

        metrics = pd.read_csv(run_dir / "metrics.csv")
        assert set(metrics["mode"]) == {"fixed", "none"}
        counts = metrics.groupby("mode")["n_parameters"].first()
        assert counts["fixed"] == counts["none"]
        assert set(_timings(run_dir)) >= {"preprocess", "graph", "spectral", "train", "report"}

    def test_no_pe_run_skips_graph_stages(self, tiny_run_config, tmp_path):
        run_dir = run_pipeline(tiny_run_config("none"), output_root=tmp_path)
        stages = _manifest(run_dir)["stages"]
        assert stages["graph"] == {"status": "skipped", "artifacts": {}}
        assert stages["spectral"]["status"] == "skipped"
        assert not (run_dir / "pe.csv").exists()

        summary = report(run_dir)
        assert summary.complete
        assert "improvement" not in set(summary.rows["section"])

    def test_reruns_are_identical(self, tiny_run_config, tmp_path):
        config = tiny_run_config("fixed")
        first = run_pipeline(config, output_root=tmp_path / "a", resume=False)
        second = run_pipeline(config, output_root=tmp_path / "b", resume=False)
        assert first.name == second.name
        assert _manifest(first) == _manifest(second)

    def test_resume_skips_intact_stages(self, tiny_run_config, tmp_path):
        config = tiny_run_config("fixed")
        run_dir = run_pipeline(config, output_root=tmp_path)
        before = _manifest(run_dir)

        run_pipeline(config, output_root=tmp_path)
        assert _timings(run_dir) == {}
        assert _manifest(run_dir) == before

        (run_dir / "pe.csv").unlink()
        run_pipeline(config, output_root=tmp_path)
        rerun = set(_timings(run_dir))
        assert {"spectral", "train", "report"} <= rerun
        assert not {"preprocess", "graph"} & rerun
        stages = _manifest(run_dir)["stages"]
        assert all(entry["status"] == "done" for entry in stages.values())
        assert stages["graph"] == before["stages"]["graph"]
        assert (run_dir / "pe.csv").exists()

    def test_failing_stage_is_named(self, tiny_run_config, tmp_path):
        adjacency = tmp_path / "adjacency.csv"
        adjacency.write_text("0,1,0\n1,0,1\n0,1,0\n", encoding="utf-8")
        config = tiny_run_config("fixed", f"graph.method = imported\ngraph.path = {adjacency}")
        with pytest.raises(StageError, match="Stage 'graph' failed") as info:
            run_pipeline(config, output_root=tmp_path / "runs")
        assert info.value.stage == "graph"

        run_dir = next((tmp_path / "runs").iterdir())
        stages = _manifest(run_dir)["stages"]
        assert stages["preprocess"]["status"] == "done"
        assert stages["graph"]["status"] == "failed"
        assert (run_dir / "table.csv").exists()


class TestReport:
    def test_identical_metrics_give_zero_improvement(self, tmp_path):
        metrics = pd.DataFrame([
            {"mode": "none", "seed": 1, "alpha": 0.0, "metric": "rmse", "value": 0.5, "n_parameters": 10},
            {"mode": "fixed", "seed": 1, "alpha": 1.0, "metric": "rmse", "value": 0.5, "n_parameters": 10},
        ])
        metrics.to_csv(tmp_path / "metrics.csv", index=False)
        summary = report(tmp_path)
        assert not summary.complete
        assert "manifest.json" in summary.missing

        improvement = summary.rows[summary.rows["section"] == "improvement"]
        assert improvement["metric"].tolist() == ["rmse_pct"]
        assert improvement["value"].iloc[0] == pytest.approx(0.0)
        alpha = summary.rows[summary.rows["section"] == "alpha"]
        assert alpha["value"].tolist() == [1.0]
        assert "Missing artifacts" in summary.text

    def test_load_report(self, tmp_path):
        pd.DataFrame([{"mode": "none", "seed": 1, "alpha": 0.0, "metric": "rmse", "value": 1.0,
                       "n_parameters": 4}]).to_csv(tmp_path / "metrics.csv", index=False)
        summary = report(tmp_path)
        loaded = load_report(tmp_path / "report.csv")
        assert loaded["section"].tolist() == summary.rows["section"].tolist()
        assert loaded["value"].tolist() == summary.rows["value"].tolist()

        pd.DataFrame({"section": ["seed"], "value": [1.0]}).to_csv(tmp_path / "bad.csv", index=False)
        with pytest.raises(ValueError, match="Report is missing columns: mode, seed, metric"):
            load_report(tmp_path / "bad.csv")


class TestCli:
    def test_stepwise_commands(self, tmp_path):
        data = tmp_path / "synthetic.csv"
        assert main(["synth", "--d", "4", "--k", "2", "--n", "40", "--out", str(data)]) == 0
        table = tmp_path / "table.csv"
        assert main(["preprocess", "--input", str(data), "--target", "y", "--out", str(table)]) == 0
        graph = tmp_path / "graph.csv"
        assert main(["estimate-graph", "--table", str(table), "--method", "pearson", "--out", str(graph)]) == 0
        assert (tmp_path / "graph_diagnostics.json").exists()
        pe = tmp_path / "pe.csv"
        assert main(["make-pe", "--graph", str(graph), "--table", str(table), "--out", str(pe)]) == 0
        assert pe.exists()

    def test_method_names_accept_hyphens(self):
        args = build_parser().parse_args(["estimate-graph", "--method", "chow-liu"])
        assert args.method == "chow_liu"
        assert build_parser().parse_args(["estimate-graph", "--method", "notears"]).method == "notears"
        with pytest.raises(SystemExit):
            build_parser().parse_args(["estimate-graph", "--method", "lasso"])

    def test_chow_liu_from_the_command_line(self, tmp_path):
        data = tmp_path / "synthetic.csv"
        assert main(["synth", "--d", "4", "--k", "2", "--n", "40", "--out", str(data)]) == 0
        table = tmp_path / "table.csv"
        assert main(["preprocess", "--input", str(data), "--target", "y", "--out", str(table)]) == 0
        graph = tmp_path / "graph.csv"
        assert main(["estimate-graph", "--table", str(table), "--method", "chow-liu", "--out", str(graph)]) == 0
        assert graph.exists()

    def test_train_pe_width_without_a_pe_file(self, tmp_path):
        data = tmp_path / "synthetic.csv"
        assert main(["synth", "--d", "4", "--k", "2", "--n", "60", "--out", str(data)]) == 0
        table = tmp_path / "table.csv"
        assert main(["preprocess", "--input", str(data), "--target", "y", "--out", str(table)]) == 0
        config = tmp_path / "train.cfg"
        config.write_text("\n".join([
            "run.seeds = 1",
            "run.max_workers = 1",
            "model.total_token_dim = 8",
            "model.n_layers = 1",
            "model.n_heads = 1",
            "training.max_epochs = 2",
            "training.min_epochs = 1",
            "training.patience = 1",
        ]), encoding="utf-8")
        train = ["train", "--table", str(table), "--config", str(config)]

        assert main(train + ["--pe-mode", "learnable", "--pe-dim", "2", "--out", str(tmp_path / "learnable")]) == 0
        assert (tmp_path / "metrics.csv").exists()
        assert main(train + ["--pe-mode", "learnable"]) == 1
        assert main(train + ["--pe-mode", "fixed", "--pe-dim", "2"]) == 1

    def test_verify_bounds(self, tmp_path):
        out = tmp_path / "bounds.csv"
        assert main(["verify-bounds", "--setting", "single_winner", "--alphas", "0,1,2", "--out", str(out)]) == 0
        assert pd.read_csv(out)["holds"].all()

    def test_bad_config_fails_cleanly(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("run.colour = red\n", encoding="utf-8")
        assert main(["run", "--config", str(config), "--output-root", str(tmp_path)]) == 1
        assert main(["run", "--config", str(tmp_path / "absent.cfg")]) == 1
