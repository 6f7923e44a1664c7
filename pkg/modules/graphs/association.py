import math

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import mutual_info_score

from config.settings import DEFAULT_GRAPH_SETTINGS
from modules.graphs.graph import undirected_graph


def _as_matrix(X):
    X = np.asarray(getattr(X, "data", X), dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    if X.shape[0] < 2:
        raise ValueError("at least 2 samples are required")
    return X


def correlation_matrix(X):
    """
    Pearson correlation matrix; constant columns correlate 0 with everything.

    Args:
        X (numpy.ndarray): m x d data matrix

    Returns:
        numpy.ndarray: d x d correlations with a zero diagonal
    """
    X = _as_matrix(X)
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    scale = np.max(np.abs(X), axis=0) * math.sqrt(X.shape[0])
    constant = norms <= 1e-12 * np.maximum(scale, 1.0)
    norms[constant] = 1.0
    corr = (centered.T @ centered) / np.outer(norms, norms)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    np.fill_diagonal(corr, 0.0)
    return np.clip(corr, -1.0, 1.0)


def pearson_graph(X, node_names=None):
    """Undirected graph weighted by |Pearson correlation|"""
    return undirected_graph(np.abs(correlation_matrix(X)), "pearson", node_names=node_names)


def spearman_graph(X, node_names=None):
    """Undirected graph weighted by |Pearson correlation of average ranks|"""
    X = _as_matrix(X)
    ranks = rankdata(X, method="average", axis=0)
    return undirected_graph(np.abs(correlation_matrix(ranks)), "spearman", node_names=node_names)


def n_bins(m, max_bins=None):
    """Equal-width bin count: min(ceil(sqrt(m)), max_bins)"""
    max_bins = max_bins or DEFAULT_GRAPH_SETTINGS["MAX_BINS"]
    return int(min(math.ceil(math.sqrt(m)), max_bins))


def discretize(column, bins=None):
    """
    Bin codes for one column.

    Binary {0, 1} columns (one-hot nodes) keep their two native values;
    continuous columns use equal-width bins over their range.
    """
    column = np.asarray(column, dtype=np.float64)
    values = np.unique(column)
    if np.all(np.isin(values, (0.0, 1.0))):
        return column.astype(int)

    bins = bins or n_bins(len(column))
    low, high = column.min(), column.max()
    if high - low <= 0:
        return np.zeros(len(column), dtype=int)
    codes = np.floor((column - low) / (high - low) * bins).astype(int)
    return np.clip(codes, 0, bins - 1)


def mutual_information(x_i, x_j, bins=None):
    """
    Plug-in mutual information (nats) over a joint histogram.

    Args:
        x_i, x_j (array-like): Columns of equal length m >= 2
        bins (int): Override for the continuous bin count

    Returns:
        float: MI >= 0
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if len(x_i) != len(x_j):
        raise ValueError("columns must have equal length")
    if len(x_i) < 2:
        raise ValueError("at least 2 samples are required")
    mi = mutual_info_score(discretize(x_i, bins), discretize(x_j, bins))
    return max(float(mi), 0.0)


def mutual_information_matrix(X, bins=None):
    """Symmetric d x d matrix of pairwise plug-in MI, zero diagonal"""
    X = _as_matrix(X)
    d = X.shape[1]
    codes = [discretize(X[:, i], bins) for i in range(d)]
    mi = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1, d):
            mi[i, j] = mi[j, i] = max(float(mutual_info_score(codes[i], codes[j])), 0.0)
    return mi


def mi_graph(X, bins=None, node_names=None):
    """Dense undirected graph weighted by pairwise mutual information"""
    return undirected_graph(mutual_information_matrix(X, bins), "mutual_information",
                            params={"bins": bins or n_bins(_as_matrix(X).shape[0])},
                            node_names=node_names)
