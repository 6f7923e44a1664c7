import numpy as np
import pytest

from modules.graphs.graph import FeatureGraph
from modules.spectral.encoding import (
    PEMatrix,
    build_pe,
    consolidate_onehot,
    load_pe,
    make_pe,
    random_pe,
    save_pe,
    standardize_columns,
)
from modules.spectral.laplacian import (
    auto_select_k,
    laplacian,
    laplacian_matrix,
    spectral_counts,
    symmetrize,
)


def _random_adjacency(rng, d, density=0.6):
    upper = np.triu(rng.uniform(size=(d, d)) * (rng.uniform(size=(d, d)) < density), 1)
    return upper + upper.T


class TestLaplacian:
    def test_normalized_spectrum_in_range(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            decomp = laplacian(_random_adjacency(rng, 8), "normalized")
            assert decomp.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)
            assert np.all(decomp.eigenvalues >= -1e-10)
            assert np.all(decomp.eigenvalues <= 2.0 + 1e-10)
            assert np.all(np.diff(decomp.eigenvalues) >= -1e-12)

    def test_eigenvectors_are_orthonormal(self):
        rng = np.random.default_rng(1)
        decomp = laplacian(_random_adjacency(rng, 7), "unnormalized")
        V = decomp.eigenvectors
        np.testing.assert_allclose(V.T @ V, np.eye(7), atol=1e-10)
        np.testing.assert_allclose(decomp.laplacian @ V, V * decomp.eigenvalues, atol=1e-10)

    def test_sign_convention(self):
        rng = np.random.default_rng(2)
        decomp = laplacian(_random_adjacency(rng, 6, density=1.0), "normalized")
        for j in range(6):
            column = decomp.eigenvectors[:, j]
            pivot = np.argmax(np.abs(column))
            assert column[pivot] > 0

    def test_isolated_node_gets_identity_row(self):
        A = np.zeros((3, 3))
        A[0, 1] = A[1, 0] = 1.0
        L = laplacian_matrix(A, "normalized")
        np.testing.assert_array_equal(L[2], [0.0, 0.0, 1.0])

    def test_rejects_invalid_adjacency(self):
        with pytest.raises(ValueError, match="adjacency must be symmetric"):
            laplacian_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
        with pytest.raises(ValueError, match="adjacency must be nonnegative"):
            laplacian_matrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))
        with pytest.raises(ValueError, match="adjacency must have a zero diagonal"):
            laplacian_matrix(np.eye(2))

    def test_symmetrize(self):
        A = np.array([[0.0, 2.0], [0.0, 0.0]])
        np.testing.assert_array_equal(symmetrize(A), [[0.0, 1.0], [1.0, 0.0]])


class TestAutoK:
    def test_k_within_bounds_on_random_spectra(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            d = int(rng.integers(3, 40))
            eigenvalues = np.concatenate([[0.0], np.sort(rng.uniform(0.0, 2.0, size=d - 1))])
            k_first, k_last = auto_select_k(eigenvalues)
            assert 2 <= k_first <= 10
            assert k_first == k_last

    def test_counts_follow_thresholds(self):
        eigenvalues = [0.0, 0.1, 0.2, 0.3, 1.0, 1.6, 1.8]
        counts = spectral_counts(eigenvalues)
        assert counts["low_raw"] == 3
        assert counts["high_raw"] == 2
        # Fewer candidates than the gap analysis needs: all are kept
        assert counts["low_count"] == 3

    def test_gap_truncates_candidates(self):
        eigenvalues = [0.0, 0.10, 0.11, 0.12, 0.13, 0.60, 0.61, 0.62, 1.0]
        counts = spectral_counts(eigenvalues)
        assert counts["low_raw"] == 7
        assert counts["low_count"] == 4
        assert auto_select_k(eigenvalues) == (4, 4)

    def test_minimum_k(self):
        assert auto_select_k([0.0, 1.0, 1.0, 1.0]) == (2, 2)


class TestBuildPE:
    def test_columns_are_standardized_and_scaled(self):
        rng = np.random.default_rng(4)
        decomp = laplacian(_random_adjacency(rng, 9, density=1.0), "normalized")
        pe = build_pe(decomp, 2, 2, alpha=3.0)
        assert pe.values.shape == (9, 4)
        np.testing.assert_allclose(pe.values.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(pe.values.std(axis=0), 3.0, atol=1e-10)

    def test_skips_the_first_eigenvector(self):
        rng = np.random.default_rng(5)
        decomp = laplacian(_random_adjacency(rng, 6, density=1.0), "normalized")
        pe = build_pe(decomp, 1, 1, alpha=1.0)
        expected, _ = standardize_columns(decomp.eigenvectors[:, [1, 5]])
        np.testing.assert_allclose(pe.values, expected)

    def test_not_enough_eigenvectors(self):
        rng = np.random.default_rng(6)
        decomp = laplacian(_random_adjacency(rng, 4, density=1.0), "normalized")
        with pytest.raises(ValueError, match="not enough eigenvectors"):
            build_pe(decomp, 2, 2, alpha=1.0)

    def test_constant_column_is_zeroed(self):
        values, zeroed = standardize_columns(np.array([[1.0, 2.0], [1.0, 3.0], [1.0, 4.0]]))
        assert zeroed == [0]
        np.testing.assert_array_equal(values[:, 0], np.zeros(3))

    def test_with_alpha_rescales(self):
        pe = PEMatrix(np.array([[2.0, -2.0], [-2.0, 2.0]]), 2.0, 1, 1)
        np.testing.assert_allclose(pe.with_alpha(1.0).values, [[1.0, -1.0], [-1.0, 1.0]])
        with pytest.raises(ValueError):
            PEMatrix(np.zeros((2, 2)), 0.0, 1, 1).with_alpha(1.0)


class TestConsolidation:
    def test_group_rows_are_averaged(self):
        pe = PEMatrix(np.arange(8, dtype=float).reshape(4, 2), 1.0, 1, 1)
        merged = consolidate_onehot(pe, [[0], [1, 2, 3]], row_names=["a", "b"])
        assert merged.consolidated
        np.testing.assert_allclose(merged.values, [[0.0, 1.0], [4.0, 5.0]])

    def test_missing_node(self):
        pe = PEMatrix(np.zeros((2, 2)), 1.0, 1, 1)
        with pytest.raises(ValueError, match="group references missing node 5"):
            consolidate_onehot(pe, [[0], [5]])


class TestMakePE:
    def test_explicit_k_is_clamped(self):
        rng = np.random.default_rng(7)
        graph = FeatureGraph(_random_adjacency(rng, 5, density=1.0), "imported")
        pe, _, info = make_pe(graph, k=4, alpha=1.0)
        assert info["clamped"]
        assert pe.k_first == 2 and pe.k_last == 2

    def test_groups_and_source_hash(self):
        rng = np.random.default_rng(8)
        graph = FeatureGraph(_random_adjacency(rng, 7, density=1.0), "imported")
        pe, decomp, info = make_pe(graph, groups=[[0], [1], [2, 3, 4], [5, 6]], k=2, alpha=1.0,
                                   row_names=["a", "b", "c", "d"])
        assert pe.n_rows == 4
        assert pe.row_names == ["a", "b", "c", "d"]
        assert pe.source_hash == graph.content_hash()
        assert decomp.n_nodes == 7
        assert not info["clamped"]

    def test_random_pe_statistics(self):
        pe = random_pe((20, 4), 2.0, seed=1)
        np.testing.assert_allclose(pe.values.std(axis=0), 2.0, atol=1e-10)
        np.testing.assert_array_equal(pe.values, random_pe((20, 4), 2.0, seed=1).values)

    def test_save_and_load(self, tmp_path):
        rng = np.random.default_rng(9)
        graph = FeatureGraph(_random_adjacency(rng, 6, density=1.0), "imported")
        pe, _, _ = make_pe(graph, k=2, alpha=1.5, row_names=[f"x{i}" for i in range(6)])
        path, _ = save_pe(pe, tmp_path / "pe.csv")
        loaded = load_pe(path)
        np.testing.assert_array_equal(loaded.values, pe.values)
        assert loaded.alpha == 1.5
        assert loaded.row_names == pe.row_names
        assert loaded.consolidated
