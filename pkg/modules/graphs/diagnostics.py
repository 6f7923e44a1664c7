import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from modules.spectral.laplacian import symmetrize

logger = logging.getLogger(__name__)


@dataclass
class GraphDiagnostics:
    """Structural summary of a feature graph"""

    entropy: float
    fiedler: float
    per_node_entropy: List[float] = field(default_factory=list)
    n_edges: int = 0
    density: float = 0.0
    degenerate: bool = False

    def to_dict(self):
        return {
            "entropy": self.entropy,
            "fiedler": self.fiedler,
            "per_node_entropy": self.per_node_entropy,
            "n_edges": self.n_edges,
            "density": self.density,
            "degenerate": self.degenerate,
        }


def _raw_weights(G):
    return np.asarray(getattr(G, "weights", G), dtype=np.float64)


def _weights(G):
    weights = _raw_weights(G)
    if getattr(G, "directed", False) or not np.array_equal(weights, weights.T):
        weights = symmetrize(weights)
    return weights


def node_entropies(G):
    """
    Normalized entropy H_i of each node's outgoing-weight distribution.

    Rows are read as outgoing weights, so directed graphs keep their orientation.
    Nodes with no outgoing weight get NaN.

    Returns:
        numpy.ndarray: H_i in [0, 1] per node (NaN when isolated)
    """
    weights = _raw_weights(G)
    n = weights.shape[0]
    totals = weights.sum(axis=1)
    entropies = np.full(n, np.nan)

    for i in range(n):
        if totals[i] <= 0:
            continue
        if n <= 2:
            # ln(n-1) = 0: a single-neighbour distribution carries no entropy
            entropies[i] = 0.0
            continue
        p = weights[i][weights[i] > 0] / totals[i]
        entropies[i] = float(-(p * np.log(p)).sum() / math.log(n - 1))

    return np.clip(entropies, 0.0, 1.0)


def graph_entropy(G):
    """
    Mean normalized node entropy over non-isolated nodes.

    Returns:
        float: Entropy in [0, 1]; 0 when every node is isolated
    """
    entropies = node_entropies(G)
    present = entropies[~np.isnan(entropies)]
    if len(present) == 0:
        logger.warning("Graph entropy is degenerate: every node is isolated")
        return 0.0
    return float(present.mean())


def fiedler_value(G):
    """
    Second-smallest eigenvalue of the unnormalized Laplacian of the symmetrized graph.

    Returns:
        float: Algebraic connectivity, clipped at 0
    """
    weights = _weights(G)
    if weights.shape[0] < 2:
        raise ValueError("Fiedler value needs at least 2 nodes")
    laplacian = np.diag(weights.sum(axis=1)) - weights
    eigenvalues = np.linalg.eigvalsh(laplacian)
    return float(max(eigenvalues[1], 0.0))


def diagnose(G):
    """
    Compute entropy, Fiedler value and edge statistics for a graph.

    Returns:
        GraphDiagnostics: Structural diagnostics
    """
    weights = _weights(G)
    n = weights.shape[0]
    entropies = node_entropies(G)
    n_edges = int(np.count_nonzero(np.triu(weights)))
    possible = n * (n - 1) / 2
    degenerate = bool(np.all(np.isnan(entropies)))

    return GraphDiagnostics(
        entropy=graph_entropy(G),
        fiedler=fiedler_value(G) if n >= 2 else 0.0,
        per_node_entropy=[None if np.isnan(h) else float(h) for h in entropies],
        n_edges=n_edges,
        density=n_edges / possible if possible > 0 else 0.0,
        degenerate=degenerate,
    )
