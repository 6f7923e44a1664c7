import networkx as nx
import numpy as np

from modules.graphs.association import _as_matrix, mutual_information_matrix, n_bins
from modules.graphs.graph import FeatureGraph


def max_spanning_tree_edges(weights):
    """
    Maximum-weight spanning tree by Kruskal's algorithm.

    Edges are inserted in lexicographic (i, j) order and Kruskal's stable
    sort keeps that order among equal weights, which fixes the tie-break.

    Args:
        weights (numpy.ndarray): Symmetric d x d weight matrix

    Returns:
        list: Sorted (i, j) pairs with i < j
    """
    d = weights.shape[0]
    G = nx.Graph()
    G.add_nodes_from(range(d))
    for i in range(d):
        for j in range(i + 1, d):
            G.add_edge(i, j, weight=float(weights[i, j]))
    tree = nx.maximum_spanning_tree(G, weight="weight", algorithm="kruskal")
    return sorted((min(u, v), max(u, v)) for u, v in tree.edges())


def chow_liu_tree(X, bins=None, node_names=None):
    """
    Chow-Liu tree: maximum spanning tree over pairwise mutual information.

    Args:
        X (numpy.ndarray): m x d data matrix, d >= 2

    Returns:
        FeatureGraph: Undirected tree weighted by MI, tree edges listed in params
    """
    X = _as_matrix(X)
    d = X.shape[1]
    if d < 2:
        raise ValueError("Chow-Liu tree needs at least 2 features")

    mi = mutual_information_matrix(X, bins)
    edges = max_spanning_tree_edges(mi)

    weights = np.zeros((d, d))
    for i, j in edges:
        weights[i, j] = weights[j, i] = mi[i, j]

    return FeatureGraph(
        weights,
        "chow_liu",
        directed=False,
        params={"tree_edges": [list(e) for e in edges], "bins": bins or n_bins(X.shape[0])},
        node_names=node_names,
    )
