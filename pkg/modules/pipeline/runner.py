import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from config.settings import ARTIFACT_NAMES
from modules.analysis.analyzer import improvement_percentage
from modules.graphs.diagnostics import diagnose
from modules.graphs.estimator import estimate_graph
from modules.graphs.graph import import_graph, load_graph, save_graph
from modules.model.checkpoint import save_checkpoint
from modules.model.training import (
    alpha_select,
    build_model,
    evaluate,
    table_groups,
    train,
)
from modules.preprocess.cleaner import load_prepared_data, preprocess_table, save_prepared_data
from modules.preprocess.table import read_raw_csv
from modules.spectral.encoding import load_pe, make_pe, random_pe, save_pe
from modules.synthetic.generator import SyntheticSpec, generate, to_prepared
from utils.helpers import (
    atomic_write_dataframe,
    atomic_write_json,
    atomic_write_text,
    check_required_columns,
    run_grid,
    sha256_file,
)

logger = logging.getLogger(__name__)

STAGES = ("preprocess", "graph", "spectral", "train", "report")
REPORT_COLUMNS = ["section", "mode", "seed", "metric", "value"]
METRIC_COLUMNS = ["mode", "seed", "alpha", "metric", "value", "n_parameters"]
TIMINGS_FILE = "timings.json"


class StageError(RuntimeError):
    """A pipeline stage failed; earlier artifacts stay on disk"""

    def __init__(self, stage, cause):
        self.stage, self.cause = stage, cause
        super().__init__(f"Stage '{stage}' failed: {cause}")


@dataclass
class ReportSummary:
    rows: pd.DataFrame
    missing: List[str] = field(default_factory=list)
    text: str = ""

    @property
    def complete(self):
        return not self.missing


def _primary_metric(task):
    return "rmse" if task == "regression" else "balanced_accuracy"


class PipelineRun:
    """
    One pipeline execution inside a content-addressed run directory.

    The manifest lists, per stage, the SHA-256 of every artifact it wrote.
    Wall-clock timings go to a separate file so reruns of the same config
    produce the same manifest.
    """

    def __init__(self, config, output_root=None):
        self.config = config.validate()
        if output_root is not None:
            self.run_dir = Path(output_root) / config.run_dir().name
        else:
            self.run_dir = config.run_dir()
        self.manifest_path = self.run_dir / ARTIFACT_NAMES["MANIFEST"]
        self.manifest = {"config_hash": config.config_hash(), "config": config.canonical(), "stages": {}}
        self.timings: Dict[str, float] = {}
        self.data = None
        self.graph = None
        self.pe = None

    @property
    def pe_mode(self):
        return self.config.get("pe", "mode")

    def path(self, name):
        return self.run_dir / name

    def _record(self, stage, paths, status="done"):
        artifacts = {}
        for path in paths:
            path = Path(path)
            artifacts[path.relative_to(self.run_dir).as_posix()] = sha256_file(path)
        self.manifest["stages"][stage] = {"status": status, "artifacts": dict(sorted(artifacts.items()))}
        self._write_manifest()

    def _write_manifest(self):
        atomic_write_json(self.manifest_path, self.manifest)
        atomic_write_json(self.path(TIMINGS_FILE), self.timings)

    def _load_previous(self):
        if not self.manifest_path.exists():
            return None
        previous = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        if previous.get("config_hash") != self.manifest["config_hash"]:
            logger.warning("Manifest in %s belongs to another config; starting over", self.run_dir)
            return None
        return previous

    def _is_intact(self, entry):
        if not entry or entry.get("status") not in ("done", "skipped"):
            return False
        for name, digest in entry["artifacts"].items():
            path = self.path(name)
            if not path.exists() or sha256_file(path) != digest:
                return False
        return True

    def run(self, resume=True):
        self.run_dir.mkdir(parents=True, exist_ok=True)
        previous = self._load_previous() if resume else None
        upstream_changed = previous is None

        for stage in STAGES:
            entry = previous["stages"].get(stage) if previous else None
            if not upstream_changed and self._is_intact(entry):
                logger.info("Resuming: stage '%s' already complete", stage)
                self.manifest["stages"][stage] = entry
                self._load_stage(stage, entry)
                continue

            upstream_changed = True
            start = time.perf_counter()
            try:
                getattr(self, f"_stage_{stage}")()
            except Exception as e:
                self.manifest["stages"][stage] = {"status": "failed", "artifacts": {}, "error": str(e)}
                self._write_manifest()
                logger.error("Stage '%s' failed: %s", stage, e)
                raise StageError(stage, e) from e
            self.timings[stage] = time.perf_counter() - start

        self._write_manifest()
        logger.info("Pipeline finished in %s", self.run_dir)
        return self.run_dir

    def _load_stage(self, stage, entry):
        if entry["status"] == "skipped":
            return
        if stage == "preprocess":
            self.data = load_prepared_data(self.path(ARTIFACT_NAMES["TABLE"]))
        elif stage == "graph":
            self.graph = load_graph(self.path(ARTIFACT_NAMES["GRAPH"]))
        elif stage == "spectral":
            self.pe = load_pe(self.path(ARTIFACT_NAMES["PE"]))

    def _stage_preprocess(self):
        data_cfg = self.config.values["data"]
        seed = data_cfg["split_seed"]
        if data_cfg["path"]:
            raw = read_raw_csv(data_cfg["path"], kinds=self.config.kinds)
            self.data = preprocess_table(raw, target=data_cfg["target"], task=data_cfg["task"], seed=seed)
        else:
            logger.info("No data path configured; generating a synthetic dataset")
            spec = SyntheticSpec(d=data_cfg["synthetic_d"], k=data_cfg["synthetic_k"],
                                 n=data_cfg["synthetic_n"], seed=seed)
            self.data = to_prepared(generate(spec), seed=seed)
        paths = save_prepared_data(self.data, self.path(ARTIFACT_NAMES["TABLE"]))
        self._record("preprocess", [paths[0], paths[0].with_suffix(".json"), paths[1]])

    def _stage_graph(self):
        if self.pe_mode == "none":
            self._record("graph", [], status="skipped")
            return
        graph_cfg = self.config.values["graph"]
        table = self.data.table
        if graph_cfg["method"] == "imported":
            self.graph = import_graph(graph_cfg["path"], n_nodes=table.n_nodes,
                                      directed=graph_cfg["directed"], node_names=table.columns)
        else:
            params = {}
            if graph_cfg["method"] == "notears":
                params = {"lambda1": graph_cfg["lambda1"], "w_threshold": graph_cfg["w_threshold"],
                          "lambda_search": graph_cfg["lambda_search"]}
            X_train, _ = self.data.split("train")
            self.graph = estimate_graph(X_train, graph_cfg["method"], node_names=table.columns, **params)
            self.timings["graph_estimation"] = self.graph.params.pop("elapsed_seconds", 0.0)

        graph_path, sidecar = save_graph(self.graph, self.path(ARTIFACT_NAMES["GRAPH"]))
        diagnostics_path = self.path(ARTIFACT_NAMES["DIAGNOSTICS"])
        atomic_write_json(diagnostics_path, diagnose(self.graph).to_dict())
        self._record("graph", [graph_path, sidecar, diagnostics_path])

    def _stage_spectral(self):
        if self.pe_mode == "none":
            self._record("spectral", [], status="skipped")
            return
        spectral_cfg = self.config.values["spectral"]
        table = self.data.table
        self.pe, decomp, info = make_pe(self.graph, groups=table.groups, alpha=1.0, k=spectral_cfg["k"],
                                        laplacian_kind=spectral_cfg["laplacian"], row_names=table.feature_names)

        spectrum = pd.DataFrame(decomp.eigenvectors, columns=[f"v{i + 1}" for i in range(decomp.n_nodes)])
        spectrum.insert(0, "eigenvalue", decomp.eigenvalues)
        spectrum_path = self.path(ARTIFACT_NAMES["SPECTRUM"])
        atomic_write_dataframe(spectrum_path, spectrum)
        info_path = spectrum_path.with_suffix(".json")
        atomic_write_json(info_path, info)
        pe_path, pe_sidecar = save_pe(self.pe, self.path(ARTIFACT_NAMES["PE"]))
        self._record("spectral", [spectrum_path, info_path, pe_path, pe_sidecar])

    def _train_one(self, mode, seed):
        data = self.data
        task = data.task
        n_classes = int(np.max(data.target)) + 1 if task == "classification" else 1
        overrides = {**self.config.model_overrides(), "groups": table_groups(data.table)}
        training = self.config.training_config()
        pe_cfg = self.config.values["pe"]
        width = self.pe.width if self.pe is not None else 0

        if mode == "fixed":
            source = self.pe
        elif mode == "random":
            source = random_pe((data.table.n_features, width), 1.0, seed)
        else:
            source = None

        def make_model(alpha):
            return build_model(data.table.n_features, pe_mode=mode, pe=source, pe_dim=width, alpha=alpha,
                               task=task, n_classes=n_classes, seed=seed, **overrides)

        if mode == "none":
            alpha, result = 0.0, train(make_model(0.0), data, training)
        elif pe_cfg["alpha_grid"]:
            alpha, results = alpha_select(make_model, data, [float(a) for a in pe_cfg["alpha_grid"]], training)
            result = results[alpha]
        else:
            alpha = float(pe_cfg["alpha"])
            result = train(make_model(alpha), data, training)

        X_test, y_test = data.split("test")
        class_counts = None
        if task == "classification":
            class_counts = np.bincount(np.asarray(data.split("train")[1], dtype=int), minlength=n_classes)
        metrics = evaluate(result.model, X_test, y_test, class_counts)
        metrics["best_epoch"] = float(result.best_epoch)
        return alpha, result.model, metrics

    def _stage_train(self):
        modes = ["none"] if self.pe_mode == "none" else [self.pe_mode, "none"]
        seeds = self.config.seeds
        jobs = {(mode, seed): (mode, seed) for mode in modes for seed in seeds}
        results = run_grid(jobs, lambda job: self._train_one(*job),
                           max_workers=self.config.get("run", "max_workers"), desc="Training", progress=False)

        rows, paths = [], []
        checkpoint_dir = self.path("checkpoints")
        for (mode, seed), (alpha, model, metrics) in results.items():
            prefix = checkpoint_dir / f"{ARTIFACT_NAMES['CHECKPOINT']}_{mode}_seed{seed}"
            paths.extend(save_checkpoint(model, prefix))
            for metric, value in sorted(metrics.items()):
                rows.append({"mode": mode, "seed": seed, "alpha": alpha, "metric": metric, "value": value,
                             "n_parameters": model.count_parameters()})

        metrics_path = self.path(ARTIFACT_NAMES["METRICS"])
        atomic_write_dataframe(metrics_path, pd.DataFrame(rows, columns=METRIC_COLUMNS))
        self._record("train", paths + [metrics_path])

    def _stage_report(self):
        summary = report(self.run_dir)
        self._record("report", [self.path(ARTIFACT_NAMES["REPORT"]), self.path("report.txt")])
        return summary


def run_pipeline(config, output_root=None, resume=True):
    """
    Execute preprocess, graph, spectral, train and report in order.

    Args:
        config (RunConfig): Validated run configuration
        output_root (str or Path): Overrides run.output_dir and the environment variable
        resume (bool): Skip stages whose recorded artifacts are still intact

    Returns:
        Path: The run directory

    Raises:
        StageError: Naming the failing stage; artifacts already written are kept
    """
    return PipelineRun(config, output_root).run(resume=resume)


def _read_manifest(run_dir):
    path = run_dir / ARTIFACT_NAMES["MANIFEST"]
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def _expected_artifacts(manifest):
    expected = [ARTIFACT_NAMES["TABLE"], ARTIFACT_NAMES["METRICS"]]
    skipped = manifest and manifest["stages"].get("graph", {}).get("status") == "skipped"
    if not skipped:
        expected[1:1] = [ARTIFACT_NAMES["GRAPH"], ARTIFACT_NAMES["DIAGNOSTICS"],
                         ARTIFACT_NAMES["SPECTRUM"], ARTIFACT_NAMES["PE"]]
    return expected


def _report_rows(metrics, task, diagnostics):
    rows = []
    for _, row in metrics.sort_values(["mode", "seed", "metric"]).iterrows():
        rows.append({"section": "seed", "mode": row["mode"], "seed": int(row["seed"]),
                     "metric": row["metric"], "value": float(row["value"])})

    means = metrics.groupby(["mode", "metric"])["value"].mean()
    for (mode, metric), value in means.items():
        rows.append({"section": "mean", "mode": mode, "seed": None, "metric": metric, "value": float(value)})

    primary = _primary_metric(task)
    if ("none", primary) in means.index:
        baseline = float(means[("none", primary)])
        for mode in sorted(set(metrics["mode"]) - {"none"}):
            if (mode, primary) not in means.index:
                continue
            if baseline == 0:
                logger.warning("Baseline %s is zero; improvement for '%s' is undefined", primary, mode)
                continue
            value = improvement_percentage(baseline, float(means[(mode, primary)]),
                                           higher_is_better=primary != "rmse")
            rows.append({"section": "improvement", "mode": mode, "seed": None,
                         "metric": primary + "_pct", "value": value})

    chosen = metrics[metrics["mode"] != "none"].groupby(["mode", "seed"])["alpha"].first()
    for (mode, seed), alpha in chosen.items():
        rows.append({"section": "alpha", "mode": mode, "seed": int(seed), "metric": "alpha", "value": float(alpha)})

    for key in ("entropy", "fiedler", "n_edges", "density"):
        if diagnostics and diagnostics.get(key) is not None:
            rows.append({"section": "diagnostic", "mode": None, "seed": None, "metric": key,
                         "value": float(diagnostics[key])})
    return rows


def _report_text(run_dir, frame, missing, task):
    lines = [f"Run: {run_dir.name}", f"Task: {task}"]
    if missing:
        lines.append("Missing artifacts: " + ", ".join(missing))

    means = frame[frame["section"] == "mean"]
    if len(means):
        lines.append("")
        lines.append("Mean test metrics:")
        for _, row in means.iterrows():
            lines.append(f"  {row['mode']:<10} {row['metric']:<18} {row['value']:.6f}")
    improvements = frame[frame["section"] == "improvement"]
    for _, row in improvements.iterrows():
        lines.append(f"Improvement of '{row['mode']}' over no PE: {row['value']:.2f}%")
    alphas = frame[frame["section"] == "alpha"]
    if len(alphas):
        chosen = ", ".join(f"seed {int(r['seed'])}: {r['value']:g}" for _, r in alphas.iterrows())
        lines.append(f"Chosen alpha: {chosen}")
    diagnostics = frame[frame["section"] == "diagnostic"]
    if len(diagnostics):
        lines.append("Graph: " + ", ".join(f"{r['metric']}={r['value']:.4g}" for _, r in diagnostics.iterrows()))
    return "\n".join(lines) + "\n"


def report(run_dir):
    """
    Summarize a run directory into report.csv and report.txt.

    Rows carry a section: per-seed metrics, means per mode, improvement over
    the no-PE baseline in percent, chosen alpha per seed and graph
    diagnostics. Missing artifacts are listed and whatever is present is
    still reported.

    Returns:
        ReportSummary: Report rows, missing artifact names and the text summary
    """
    run_dir = Path(run_dir)
    manifest = _read_manifest(run_dir)
    missing = [] if manifest else [ARTIFACT_NAMES["MANIFEST"]]
    missing += [name for name in _expected_artifacts(manifest) if not (run_dir / name).exists()]

    task = "regression"
    split_file = run_dir / (Path(ARTIFACT_NAMES["TABLE"]).stem + "_splits.json")
    if split_file.exists():
        task = json.loads(split_file.read_text(encoding="utf-8"))["task"]

    diagnostics: Optional[dict] = None
    diagnostics_path = run_dir / ARTIFACT_NAMES["DIAGNOSTICS"]
    if diagnostics_path.exists():
        diagnostics = json.loads(diagnostics_path.read_text(encoding="utf-8"))

    metrics_path = run_dir / ARTIFACT_NAMES["METRICS"]
    metrics = pd.read_csv(metrics_path) if metrics_path.exists() else pd.DataFrame(columns=METRIC_COLUMNS)
    frame = pd.DataFrame(_report_rows(metrics, task, diagnostics), columns=REPORT_COLUMNS)
    frame["seed"] = frame["seed"].astype("Int64")

    if missing:
        logger.warning("Report for %s is partial; missing %s", run_dir, ", ".join(missing))
    text = _report_text(run_dir, frame, missing, task)
    atomic_write_dataframe(run_dir / ARTIFACT_NAMES["REPORT"], frame)
    atomic_write_text(run_dir / "report.txt", text)
    return ReportSummary(rows=frame, missing=missing, text=text)


def load_report(path):
    """Read a report CSV back into a DataFrame"""
    frame = pd.read_csv(path)
    valid, missing = check_required_columns(frame, REPORT_COLUMNS)
    if not valid:
        raise ValueError(f"Report is missing columns: {', '.join(missing)}")
    frame["seed"] = frame["seed"].astype("Int64")
    return frame
