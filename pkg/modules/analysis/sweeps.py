import logging
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np
import pandas as pd

from config.settings import DEFAULT_SEEDS, DEFAULT_SWEEP_SETTINGS, RANK_ALPHA_GRID
from modules.analysis.analyzer import improvement_percentage
from modules.analysis.rank import effective_rank
from modules.graphs.estimator import estimate_graph
from modules.model.training import build_model, evaluate, table_groups, train
from modules.spectral.encoding import make_pe, random_pe
from modules.synthetic.generator import SyntheticSpec, generate, structure_regime, to_prepared
from utils.helpers import run_grid

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["mode", "alpha", "seed", "metric", "value"]

# Small single-layer, single-head model used by the sweeps
SWEEP_MODEL = {
    "total_token_dim": DEFAULT_SWEEP_SETTINGS["TOTAL_TOKEN_DIM"],
    "n_layers": 1,
    "n_heads": 1,
}


@dataclass
class SweepReport:
    """
    Long-format sweep results: one row per (mode, alpha, seed, metric).

    Extra key columns (e.g. regime) may precede the standard ones.
    """

    rows: pd.DataFrame
    descriptor: Dict[str, Any] = field(default_factory=dict)

    def summary(self, keys=("mode", "alpha")):
        """Mean, per-seed count and 95% half-width per key and metric"""
        keys = [k for k in keys if k in self.rows.columns] + ["metric"]
        grouped = self.rows.groupby(keys)["value"]
        summary = grouped.agg(["mean", "std", "count"]).reset_index()
        summary["std"] = summary["std"].fillna(0.0)
        summary["half_width"] = 1.96 * summary["std"] / np.sqrt(summary["count"])
        return summary

    def means(self, metric, keys=("mode", "alpha")):
        """Mapping key tuple -> mean value of one metric"""
        summary = self.summary(keys)
        summary = summary[summary["metric"] == metric]
        key_cols = [k for k in keys if k in summary.columns]
        return {tuple(row[k] for k in key_cols): row["mean"] for _, row in summary.iterrows()}

    def to_csv(self, path=None):
        return self.rows.to_csv(path, index=False) if path else self.rows.to_csv(index=False)


class RankReport(SweepReport):
    """Effective-rank sweep report; bounds go in the descriptor when known"""


def _cls_rank(model, data):
    X_test, _ = data.split("test")
    return effective_rank(model.cls_embeddings(X_test))


def rank_sweep(data, pe, alpha_grid=None, seeds=None, modes=("none", "fixed", "random"),
               config=None, forward_only=None, max_workers=None, progress=False, **spec_overrides):
    """
    Effective rank of test-split CLS embeddings per PE mode, alpha and seed.

    Mode "none" has no alpha dependence and is run once per seed.

    Args:
        data (PreparedData): Train/val/test splits
        pe (PEMatrix): Unit-scale graph encodings for mode "fixed"
        alpha_grid (list): Alphas (default: the desk-scale rank grid)
        seeds (list): Seeds (default 1..5)
        forward_only (bool): Skip training and measure freshly initialized models

    Returns:
        RankReport: Rows (mode, alpha, seed, 'effective_rank', value)
    """
    alpha_grid = list(alpha_grid if alpha_grid is not None else RANK_ALPHA_GRID)
    seeds = list(seeds or DEFAULT_SEEDS)
    forward_only = DEFAULT_SWEEP_SETTINGS["FORWARD_ONLY"] if forward_only is None else forward_only
    max_workers = max_workers or DEFAULT_SWEEP_SETTINGS["MAX_WORKERS"]
    overrides = {**SWEEP_MODEL, **spec_overrides}
    overrides.setdefault("groups", table_groups(data.table))
    n_features, width = data.table.n_features, pe.width
    n_classes = int(np.max(data.target)) + 1 if data.task == "classification" else 1

    def run(job):
        mode, alpha, seed = job
        source = pe if mode == "fixed" else (random_pe((n_features, width), 1.0, seed) if mode == "random" else None)
        model = build_model(n_features, pe_mode=mode, pe=source, pe_dim=width, alpha=alpha,
                            task=data.task, n_classes=n_classes, seed=seed, **overrides)
        if not forward_only:
            model = train(model, data, config).model
        return _cls_rank(model, data)

    jobs = {}
    for seed in seeds:
        for mode in modes:
            for alpha in ([0.0] if mode == "none" else alpha_grid):
                jobs[(mode, float(alpha), seed)] = (mode, float(alpha), seed)
    results = run_grid(jobs, run, max_workers=max_workers, desc="Rank sweep", progress=progress)

    rows = []
    for (mode, alpha, seed), value in results.items():
        targets = alpha_grid if mode == "none" else [alpha]
        for a in targets:
            rows.append({"mode": mode, "alpha": float(a), "seed": seed, "metric": "effective_rank", "value": value})
    frame = pd.DataFrame(rows, columns=REPORT_COLUMNS).sort_values(["mode", "alpha", "seed"]).reset_index(drop=True)
    logger.info("Rank sweep finished: %d models", len(results))
    return RankReport(frame, {"n_features": n_features, "pe_width": width, "forward_only": forward_only,
                              "n_test": int(len(data.splits["test"]))})


def alpha_rmse_sweep(partitions=None, alpha_grid=None, seeds=None, d=None, n=None, graph_method="spearman",
                     config=None, max_workers=None, progress=False, **spec_overrides):
    """
    Test RMSE of fixed-PE models on structure-controlled synthetic data.

    For every partition count k and seed a dataset is generated, a graph is
    estimated on its train rows and turned into unit encodings; one model is
    trained per alpha (alpha = 0 is the no-PE baseline).

    Returns:
        SweepReport: Rows (regime, k, mode, alpha, seed, 'rmse', value)
    """
    partitions = list(partitions or DEFAULT_SWEEP_SETTINGS["REGIME_PARTITIONS"])
    alpha_grid = list(alpha_grid if alpha_grid is not None else [0.0, 0.5, 1.0, 3.0, 10.0])
    seeds = list(seeds or DEFAULT_SEEDS)
    base = SyntheticSpec()
    d = d or base.d
    n = n or base.n
    max_workers = max_workers or DEFAULT_SWEEP_SETTINGS["MAX_WORKERS"]
    overrides = {**SWEEP_MODEL, **spec_overrides}

    def prepare(job):
        k, seed = job
        dataset = generate(SyntheticSpec(d=d, k=k, n=n, seed=seed))
        data = to_prepared(dataset, seed=seed)
        X_train, _ = data.split("train")
        graph = estimate_graph(X_train, graph_method, node_names=data.table.columns)
        pe, _, _ = make_pe(graph, data.table.groups, alpha=1.0)
        return data, pe

    prepared = run_grid({(k, seed): (k, seed) for k in partitions for seed in seeds}, prepare,
                        max_workers=max_workers, desc="Synthetic datasets", progress=progress)

    def run(job):
        k, seed, alpha = job
        data, pe = prepared[(k, seed)]
        model = build_model(d, pe_mode="fixed", pe=pe, alpha=alpha, seed=seed, **overrides)
        result = train(model, data, config)
        X_test, y_test = data.split("test")
        return evaluate(result.model, X_test, y_test)["rmse"]

    jobs = {(k, seed, float(alpha)): (k, seed, float(alpha)) for k in partitions for seed in seeds for alpha in alpha_grid}
    results = run_grid(jobs, run, max_workers=max_workers, desc="Alpha sweep", progress=progress)

    rows = [{"regime": structure_regime(d, k), "k": k, "mode": "fixed", "alpha": alpha, "seed": seed,
             "metric": "rmse", "value": value}
            for (k, seed, alpha), value in results.items()]
    frame = pd.DataFrame(rows).sort_values(["k", "alpha", "seed"]).reset_index(drop=True)
    return SweepReport(frame, {"d": d, "n": n, "partitions": partitions, "graph_method": graph_method})


def regime_improvements(report, baseline_alpha=0.0):
    """
    Best-alpha improvement over the baseline per regime.

    Returns:
        pandas.DataFrame: regime, k, baseline, best_alpha, best, improvement_pct
    """
    summary = report.summary(keys=("regime", "k", "alpha"))
    rows = []
    for (regime, k), group in summary.groupby(["regime", "k"]):
        baseline = float(group.loc[group["alpha"] == baseline_alpha, "mean"].iloc[0])
        candidates = group[group["alpha"] != baseline_alpha].sort_values(["mean", "alpha"])
        best = candidates.iloc[0]
        rows.append({"regime": regime, "k": k, "baseline": baseline, "best_alpha": float(best["alpha"]),
                     "best": float(best["mean"]),
                     "improvement_pct": improvement_percentage(baseline, float(best["mean"]), higher_is_better=False)})
    return pd.DataFrame(rows)
