import itertools

import networkx as nx
import numpy as np
import pytest

from modules.graphs.association import (
    correlation_matrix,
    discretize,
    mutual_information,
    n_bins,
    pearson_graph,
    spearman_graph,
)
from modules.graphs.chow_liu import chow_liu_tree, max_spanning_tree_edges
from modules.graphs.diagnostics import diagnose, fiedler_value, graph_entropy, node_entropies
from modules.graphs.estimator import estimate_graph
from modules.graphs.graph import FeatureGraph, import_graph, load_graph, save_graph
from modules.graphs.notears import break_cycles, notears, notears_lambda_search


def _is_spanning_tree(edges, d):
    if len(edges) != d - 1:
        return False
    parent = list(range(d))

    def root(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i, j in edges:
        a, b = root(i), root(j)
        if a == b:
            return False
        parent[a] = b
    return True


def _best_tree_weight(weights):
    d = weights.shape[0]
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    best = -np.inf
    for subset in itertools.combinations(pairs, d - 1):
        if _is_spanning_tree(subset, d):
            best = max(best, sum(weights[i, j] for i, j in subset))
    return best


class TestAssociationGraphs:
    def test_correlation_properties(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((200, 5))
        X[:, 4] = 2.0
        corr = correlation_matrix(X)
        np.testing.assert_array_equal(np.diag(corr), np.zeros(5))
        np.testing.assert_array_equal(corr[4], np.zeros(5))
        np.testing.assert_allclose(corr, corr.T)
        assert np.all(np.abs(corr) <= 1.0)

    def test_pearson_matches_numpy(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((100, 4))
        expected = np.abs(np.corrcoef(X, rowvar=False))
        np.fill_diagonal(expected, 0.0)
        np.testing.assert_allclose(pearson_graph(X).weights, expected, atol=1e-12)

    def test_spearman_is_rank_invariant(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((80, 3))
        monotone = np.column_stack([np.exp(X[:, 0]), X[:, 1] ** 3, X[:, 2]])
        np.testing.assert_allclose(spearman_graph(X).weights, spearman_graph(monotone).weights, atol=1e-12)

    def test_graph_is_symmetric_with_zero_diagonal(self):
        rng = np.random.default_rng(4)
        graph = spearman_graph(rng.standard_normal((50, 6)))
        assert not graph.directed
        np.testing.assert_array_equal(graph.weights, graph.weights.T)
        np.testing.assert_array_equal(np.diag(graph.weights), np.zeros(6))

    def test_bin_count(self):
        assert n_bins(100) == 10
        assert n_bins(101) == 11
        assert n_bins(5000) == 32

    def test_binary_columns_keep_their_values(self):
        column = np.array([0.0, 1.0, 1.0, 0.0])
        np.testing.assert_array_equal(discretize(column, bins=5), [0, 1, 1, 0])

    def test_mutual_information_of_independent_and_identical(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(size=2000)
        assert mutual_information(x, x, bins=5) == pytest.approx(np.log(5), abs=0.01)
        assert mutual_information(x, rng.uniform(size=2000), bins=5) < 0.05


class TestChowLiu:
    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            d = int(rng.integers(3, 7))
            upper = np.triu(rng.uniform(size=(d, d)), 1)
            weights = upper + upper.T
            edges = max_spanning_tree_edges(weights)
            assert _is_spanning_tree(edges, d)
            total = sum(weights[i, j] for i, j in edges)
            assert total == pytest.approx(_best_tree_weight(weights), abs=1e-12)

    def test_tree_from_data(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal(500)
        b = a + 0.1 * rng.standard_normal(500)
        c = b + 0.1 * rng.standard_normal(500)
        graph = chow_liu_tree(np.column_stack([a, b, c]))
        assert graph.method == "chow_liu"
        assert graph.n_edges == 2
        assert graph.params["tree_edges"] == [[0, 1], [1, 2]]


class TestNotears:
    def test_recovers_a_chain(self):
        rng = np.random.default_rng(8)
        m = 500
        x1 = rng.standard_normal(m)
        x2 = 1.5 * x1 + 0.5 * rng.standard_normal(m)
        x3 = -1.2 * x2 + 0.5 * rng.standard_normal(m)
        graph = notears(np.column_stack([x1, x2, x3]), lambda1=0.05)
        assert graph.directed
        assert nx.is_directed_acyclic_graph(nx.DiGraph(graph.weights))
        support = graph.weights > 0
        assert support[0, 1] or support[1, 0]
        assert support[1, 2] or support[2, 1]

    def test_independent_columns_give_no_edges(self):
        rng = np.random.default_rng(9)
        graph = notears(rng.standard_normal((500, 4)), lambda1=0.1)
        assert graph.n_edges == 0

    def test_lambda_search_scores_every_candidate(self):
        rng = np.random.default_rng(12)
        x1 = rng.standard_normal(300)
        x2 = 1.5 * x1 + 0.5 * rng.standard_normal(300)
        graph, scores = notears_lambda_search(np.column_stack([x1, x2]), lambda_grid=[0.05, 0.2], seed=1)
        assert set(scores) == {0.05, 0.2}
        assert graph.params["lambda1"] in (0.05, 0.2)
        assert graph.n_edges == 1

    def test_break_cycles_removes_weakest_edge(self):
        weights = np.array([[0.0, 2.0, 0.0], [0.0, 0.0, 3.0], [0.5, 0.0, 0.0]])
        acyclic, removed = break_cycles(weights)
        assert removed == [(2, 0)]
        assert acyclic[2, 0] == 0.0
        assert acyclic[0, 1] == 2.0


class TestFeatureGraph:
    def test_rejects_invalid_weights(self):
        with pytest.raises(ValueError, match="zero diagonal"):
            FeatureGraph(np.eye(2), "pearson")
        with pytest.raises(ValueError, match="nonnegative"):
            FeatureGraph(np.array([[0.0, -1.0], [-1.0, 0.0]]), "pearson")
        with pytest.raises(ValueError, match="symmetric"):
            FeatureGraph(np.array([[0.0, 1.0], [0.5, 0.0]]), "pearson")

    def test_save_and_load(self, tmp_path):
        rng = np.random.default_rng(10)
        graph = spearman_graph(rng.standard_normal((40, 4)), node_names=["a", "b", "c", "d"])
        path, _ = save_graph(graph, tmp_path / "graph.csv")
        loaded = load_graph(path)
        np.testing.assert_array_equal(loaded.weights, graph.weights)
        assert loaded.node_names == ["a", "b", "c", "d"]
        assert loaded.content_hash() == graph.content_hash()

    def test_import_checks_size(self, tmp_path):
        path = tmp_path / "adjacency.csv"
        path.write_text("0,1,0\n1,0,1\n0,1,0\n", encoding="utf-8")
        graph = import_graph(path, n_nodes=3)
        assert graph.method == "imported"
        assert graph.n_edges == 2
        with pytest.raises(ValueError, match="the table has 4 nodes"):
            import_graph(path, n_nodes=4)

    def test_estimator_records_time(self):
        rng = np.random.default_rng(11)
        graph = estimate_graph(rng.standard_normal((60, 3)), "pearson")
        assert graph.params["elapsed_seconds"] >= 0.0
        mi = estimate_graph(rng.standard_normal((60, 3)), "mutual_information")
        assert mi.method == "mutual_information"
        assert not mi.directed
        with pytest.raises(ValueError, match="Unknown graph method"):
            estimate_graph(rng.standard_normal((60, 3)), "lasso")


class TestDiagnostics:
    def test_complete_uniform_graph(self):
        weights = np.ones((5, 5)) - np.eye(5)
        assert graph_entropy(weights) == pytest.approx(1.0)
        assert fiedler_value(weights) == pytest.approx(5.0)

    def test_path_graph(self):
        weights = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        np.testing.assert_allclose(node_entropies(weights), [0.0, 1.0, 0.0])
        assert graph_entropy(weights) == pytest.approx(1.0 / 3.0)
        assert fiedler_value(weights) == pytest.approx(1.0)

    def test_disconnected_graph_has_zero_fiedler(self):
        weights = np.zeros((4, 4))
        weights[0, 1] = weights[1, 0] = 1.0
        weights[2, 3] = weights[3, 2] = 1.0
        assert fiedler_value(weights) == pytest.approx(0.0, abs=1e-12)

    def test_isolated_nodes(self):
        weights = np.zeros((3, 3))
        weights[0, 1] = weights[1, 0] = 1.0
        entropies = node_entropies(weights)
        assert np.isnan(entropies[2])
        result = diagnose(weights)
        assert result.per_node_entropy[2] is None
        assert not result.degenerate

        empty = diagnose(np.zeros((3, 3)))
        assert empty.degenerate
        assert empty.entropy == 0.0
        assert empty.n_edges == 0

    def test_directed_graph_is_symmetrized(self):
        directed = FeatureGraph(np.array([[0.0, 2.0], [0.0, 0.0]]), "notears", directed=True)
        assert fiedler_value(directed) == pytest.approx(2.0)
        assert diagnose(directed).n_edges == 1

    def test_directed_entropy_uses_outgoing_weights(self):
        directed = FeatureGraph(np.array([[0.0, 1.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]), "notears",
                                directed=True)
        entropies = node_entropies(directed)
        np.testing.assert_allclose(entropies[:2], [1.0, 0.0])
        assert np.isnan(entropies[2])
        assert graph_entropy(directed) == pytest.approx(0.5)
        assert diagnose(directed).per_node_entropy == [1.0, 0.0, None]
