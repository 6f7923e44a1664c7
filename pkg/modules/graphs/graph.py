import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from utils.helpers import array_hash, atomic_write_dataframe, atomic_write_json

logger = logging.getLogger(__name__)

GRAPH_METHODS = ("pearson", "spearman", "mutual_information", "chow_liu", "notears", "imported")


@dataclass
class FeatureGraph:
    """
    Weighted adjacency over feature nodes with its provenance.

    weights[i, j] > 0 is an edge i -> j for directed graphs, an undirected
    edge otherwise. The diagonal is always zero.
    """

    weights: np.ndarray
    method: str
    directed: bool = False
    params: Dict[str, Any] = field(default_factory=dict)
    node_names: Optional[List[str]] = None

    def __post_init__(self) -> None:
        self.weights = np.array(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.weights.shape[1]:
            raise ValueError("weights must be a square matrix")
        if self.method not in GRAPH_METHODS:
            raise ValueError(f"Unknown graph method '{self.method}'")
        if np.any(np.diag(self.weights) != 0):
            raise ValueError("weights must have a zero diagonal")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and nonnegative")
        if not self.directed and not np.array_equal(self.weights, self.weights.T):
            raise ValueError("undirected graph weights must be exactly symmetric")
        if self.node_names is not None and len(self.node_names) != self.n_nodes:
            raise ValueError("node_names must have one entry per node")

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_edges(self) -> int:
        nonzero = int(np.count_nonzero(self.weights))
        return nonzero if self.directed else nonzero // 2

    def edges(self):
        """Sorted list of (i, j, weight); i < j for undirected graphs"""
        rows, cols = np.nonzero(self.weights if self.directed else np.triu(self.weights))
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(rows, cols)]

    def content_hash(self) -> str:
        return array_hash(self.weights)


def undirected_graph(weights, method, params=None, node_names=None):
    """Build an undirected graph from a matrix, forcing exact symmetry and a zero diagonal"""
    weights = np.abs(np.asarray(weights, dtype=np.float64))
    weights = (weights + weights.T) / 2.0
    np.fill_diagonal(weights, 0.0)
    return FeatureGraph(weights, method, directed=False, params=dict(params or {}), node_names=node_names)


def save_graph(graph, path):
    """
    Save a graph as a dense weight CSV plus a JSON sidecar.

    Returns:
        tuple: (matrix path, sidecar path)
    """
    path = Path(path)
    names = graph.node_names or [f"node_{i}" for i in range(graph.n_nodes)]
    atomic_write_dataframe(path, pd.DataFrame(graph.weights, columns=names))
    sidecar = path.with_suffix(".json")
    atomic_write_json(sidecar, {
        "method": graph.method,
        "directed": graph.directed,
        "n_nodes": graph.n_nodes,
        "params": graph.params,
        "node_names": graph.node_names,
        "hash": graph.content_hash(),
    })
    return path, sidecar


def load_graph(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    weights = pd.read_csv(path, float_precision="round_trip").to_numpy(dtype=np.float64)
    return FeatureGraph(weights, meta["method"], directed=meta["directed"],
                        params=meta.get("params", {}), node_names=meta.get("node_names"))


def _read_matrix(path):
    df = pd.read_csv(path, header=None)
    first_row = pd.to_numeric(df.iloc[0], errors="coerce")
    if first_row.isna().any():
        # Header row present
        df = df.iloc[1:]
    return df.apply(pd.to_numeric, errors="raise").to_numpy(dtype=np.float64)


def import_graph(path, n_nodes=None, directed=False, node_names=None):
    """
    Import an externally estimated adjacency matrix (e.g. a causal discovery output).

    Args:
        path (str or Path): CSV file holding an n x n numeric matrix
        n_nodes (int): Expected node count (the FeatureTable's d)
        directed (bool): Whether the matrix is a directed graph

    Returns:
        FeatureGraph: Graph with absolute weights and a zeroed diagonal
    """
    matrix = _read_matrix(path)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Imported matrix must be square, got shape {matrix.shape}")
    if n_nodes is not None and matrix.shape[0] != n_nodes:
        raise ValueError(f"Imported matrix is {matrix.shape[0]}x{matrix.shape[1]} but the table has {n_nodes} nodes")

    weights = np.abs(matrix)
    np.fill_diagonal(weights, 0.0)
    if not directed and not np.array_equal(weights, weights.T):
        logger.warning("Imported undirected matrix is not symmetric; averaging with its transpose")
        weights = (weights + weights.T) / 2.0
    return FeatureGraph(weights, "imported", directed=directed,
                        params={"source": str(path)}, node_names=node_names)
