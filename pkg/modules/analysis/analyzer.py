import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

from config.settings import DEFAULT_SPECTRAL_SETTINGS


def improvement_percentage(baseline, value, higher_is_better=False):
    """
    Relative improvement over a baseline in percent.

    Args:
        baseline (float): Baseline metric (e.g. no-PE RMSE)
        value (float): Metric of the compared run
        higher_is_better (bool): True for accuracy-like metrics

    Returns:
        float: 100 * (baseline - value) / baseline for errors, sign flipped for scores
    """
    if baseline == 0:
        raise ValueError("baseline must be nonzero")
    change = (value - baseline) if higher_is_better else (baseline - value)
    return 100.0 * change / abs(baseline)


def get_rank_statistics(report):
    """
    Summarize an effective-rank report

    Args:
        report (RankReport): Sweep output

    Returns:
        dict: Statistics per mode (mean over alphas and seeds, min, max)
        pandas.DataFrame: Mean effective rank per (mode, alpha)
    """
    rows = report.rows[report.rows["metric"] == "effective_rank"]
    stats = {"total_runs": len(rows)}
    if len(rows) == 0:
        return stats, pd.DataFrame()

    for mode, group in rows.groupby("mode"):
        stats[mode] = {
            "mean_rank": group["value"].mean(),
            "min_rank": group["value"].min(),
            "max_rank": group["value"].max(),
        }
    means = rows.groupby(["mode", "alpha"])["value"].mean().unstack("mode")
    return stats, means


def is_nonincreasing(values, tolerance=0.0):
    """
    True if the sequence never rises by more than tolerance, allowing one rise
    when tolerance > 0.
    """
    values = np.asarray(values, dtype=np.float64)
    rises = np.diff(values)
    if tolerance <= 0:
        return bool(np.all(rises <= 0))
    violations = rises[rises > 0]
    return bool(len(violations) <= 1 and np.all(violations <= tolerance))


def create_rank_curve(report, bounds=None):
    """
    Mean effective rank against alpha, one line per PE mode

    Args:
        report (RankReport): Sweep output
        bounds (pandas.DataFrame): Optional bound table (alpha, bound) to overlay

    Returns:
        matplotlib.figure.Figure: The line plot
    """
    summary = report.summary(("mode", "alpha"))
    summary = summary[summary["metric"] == "effective_rank"]
    if len(summary) == 0:
        return None

    fig, ax = plt.subplots(figsize=(10, 6))
    sns.lineplot(data=summary, x="alpha", y="mean", hue="mode", marker="o", ax=ax)
    for mode, group in summary.groupby("mode"):
        ax.fill_between(group["alpha"], group["mean"] - group["half_width"],
                        group["mean"] + group["half_width"], alpha=0.15)
    if bounds is not None and len(bounds) > 0:
        ax.plot(bounds["alpha"], bounds["bound"], color="black", linestyle="--", label="Bound")

    ax.set_title("Effective Rank of CLS Embeddings vs PE Scale", fontsize=14)
    ax.set_xlabel("alpha", fontsize=12)
    ax.set_ylabel("Effective rank", fontsize=12)
    ax.legend()
    ax.grid(alpha=0.3)
    return fig


def create_bound_plot(table):
    """Measured effective rank of a constructed setting against its bound"""
    if table is None or len(table) == 0:
        return None

    fig, ax = plt.subplots(figsize=(10, 6))
    ax.plot(table["alpha"], table["bound"], color="black", linestyle="--", label="Bound")
    ax.plot(table["alpha"], table["approximation"], color="gray", linestyle=":", label="Large-C limit")
    ax.plot(table["alpha"], table["measured"], marker="o", label="Measured")
    ax.set_yscale("log")
    ax.set_title("Effective Rank Bound Check", fontsize=14)
    ax.set_xlabel("alpha", fontsize=12)
    ax.set_ylabel("Effective rank", fontsize=12)
    ax.legend()
    ax.grid(alpha=0.3)
    return fig


def create_rmse_curve(report):
    """
    Mean test RMSE against alpha, one line per structure regime

    Returns:
        matplotlib.figure.Figure: The line plot with 95% bands
    """
    keys = ("regime", "alpha") if "regime" in report.rows.columns else ("mode", "alpha")
    summary = report.summary(keys)
    summary = summary[summary["metric"] == "rmse"]
    if len(summary) == 0:
        return None

    fig, ax = plt.subplots(figsize=(10, 6))
    hue = keys[0]
    sns.lineplot(data=summary, x="alpha", y="mean", hue=hue, marker="o", ax=ax)
    for _, group in summary.groupby(hue):
        ax.fill_between(group["alpha"], group["mean"] - group["half_width"],
                        group["mean"] + group["half_width"], alpha=0.15)

    ax.set_title("Test RMSE vs PE Scale", fontsize=14)
    ax.set_xlabel("alpha", fontsize=12)
    ax.set_ylabel("RMSE", fontsize=12)
    ax.grid(alpha=0.3)
    return fig


def create_pe_heatmap(pe):
    """
    Heatmap of a positional-encoding matrix (features x encoding columns)

    Returns:
        matplotlib.figure.Figure: The heatmap
    """
    values = pe.values
    if values.size == 0:
        return None

    fig, ax = plt.subplots(figsize=(8, max(4, 0.25 * values.shape[0])))
    columns = [f"e{i + 2}" for i in range(pe.k_first)] + [f"last {i + 1}" for i in range(pe.k_last)]
    frame = pd.DataFrame(values, columns=columns, index=pe.row_names)
    sns.heatmap(frame, cmap="coolwarm", center=0.0, ax=ax)
    ax.set_title(f"Positional Encodings (alpha = {pe.alpha:g})", fontsize=14)
    ax.set_xlabel("Eigenvector", fontsize=12)
    ax.set_ylabel("Feature", fontsize=12)
    return fig


def create_spectrum_plot(decomp, k_first=None):
    """
    Laplacian eigenvalues with the low/high frequency thresholds

    Returns:
        matplotlib.figure.Figure: The scatter plot
    """
    eigenvalues = np.asarray(decomp.eigenvalues)
    fig, ax = plt.subplots(figsize=(10, 6))
    ax.plot(np.arange(1, len(eigenvalues) + 1), eigenvalues, marker="o", linestyle="")

    if decomp.laplacian_kind == "normalized":
        ax.axhline(y=DEFAULT_SPECTRAL_SETTINGS["TAU_LOW"], color="g", linestyle="--", label="Low threshold")
        ax.axhline(y=DEFAULT_SPECTRAL_SETTINGS["TAU_HIGH"], color="r", linestyle="--", label="High threshold")
    if k_first:
        ax.axvspan(1.5, k_first + 1.5, color="g", alpha=0.1)
        ax.axvspan(len(eigenvalues) - k_first + 0.5, len(eigenvalues) + 0.5, color="r", alpha=0.1)

    ax.set_title(f"{decomp.laplacian_kind.capitalize()} Laplacian Spectrum", fontsize=14)
    ax.set_xlabel("Index", fontsize=12)
    ax.set_ylabel("Eigenvalue", fontsize=12)
    if decomp.laplacian_kind == "normalized":
        ax.legend()
    ax.grid(alpha=0.3)
    return fig


def create_graph_heatmap(graph):
    """Heatmap of a feature graph's weight matrix"""
    if graph.n_nodes == 0:
        return None
    size = max(6, 0.3 * graph.n_nodes)
    fig, ax = plt.subplots(figsize=(size, size))
    frame = pd.DataFrame(graph.weights, index=graph.node_names, columns=graph.node_names)
    sns.heatmap(frame, cmap="viridis", square=True, ax=ax)
    kind = "directed" if graph.directed else "undirected"
    ax.set_title(f"{graph.method} graph ({kind}, {graph.n_edges} edges)", fontsize=14)
    return fig
