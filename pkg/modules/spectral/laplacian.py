import logging
from dataclasses import dataclass

import numpy as np

from config.settings import DEFAULT_SPECTRAL_SETTINGS

logger = logging.getLogger(__name__)

LAPLACIAN_KINDS = ("normalized", "unnormalized")

# Eigenvalues closer than this form one degenerate cluster
_CLUSTER_TOL = 1e-9


@dataclass
class SpectralDecomposition:
    """Laplacian eigenpairs: eigenvalues ascending, column i of eigenvectors is e_i"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    laplacian_kind: str
    laplacian: np.ndarray = None

    @property
    def n_nodes(self) -> int:
        return len(self.eigenvalues)


def symmetrize(A):
    """Undirected version (A + A^T) / 2 of a square matrix"""
    A = np.asarray(getattr(A, "weights", A), dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("symmetrize expects a square matrix")
    return (A + A.T) / 2.0


def laplacian_matrix(A_sym, kind="normalized"):
    """
    Graph Laplacian of a symmetric, nonnegative, zero-diagonal adjacency.

    The normalized variant gives isolated nodes a normalized degree of 1, so
    their row and column of L are identity rows.
    """
    A_sym = np.asarray(A_sym, dtype=np.float64)
    if not np.array_equal(A_sym, A_sym.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(A_sym < 0):
        raise ValueError("adjacency must be nonnegative")
    if np.any(np.diag(A_sym) != 0):
        raise ValueError("adjacency must have a zero diagonal")

    degree = A_sym.sum(axis=1)
    if kind == "unnormalized":
        return np.diag(degree) - A_sym
    if kind == "normalized":
        inv_sqrt = np.ones_like(degree)
        connected = degree > 0
        inv_sqrt[connected] = 1.0 / np.sqrt(degree[connected])
        L = np.eye(len(degree)) - inv_sqrt[:, None] * A_sym * inv_sqrt[None, :]
        return (L + L.T) / 2.0
    raise ValueError(f"Unknown Laplacian kind '{kind}'")


def _fix_signs(vectors):
    """Flip each column so its largest-magnitude entry (first on ties) is positive"""
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        magnitude = np.abs(vectors[:, j])
        pivot = int(np.flatnonzero(magnitude >= magnitude.max() - 1e-12)[0])
        if vectors[pivot, j] < 0:
            vectors[:, j] = -vectors[:, j]
    return vectors


def _order_clusters(eigenvalues, vectors):
    """Within each degenerate eigenvalue cluster order eigenvectors lexicographically"""
    order = np.arange(len(eigenvalues))
    start = 0
    while start < len(eigenvalues):
        end = start + 1
        while end < len(eigenvalues) and eigenvalues[end] - eigenvalues[start] < _CLUSTER_TOL:
            end += 1
        if end - start > 1:
            block = np.round(vectors[:, start:end], 12)
            # lexsort keys run last-to-first, so reverse the rows
            local = np.lexsort(block[::-1])
            order[start:end] = start + local
        start = end
    return eigenvalues[order], vectors[:, order]


def laplacian(A_sym, kind="normalized"):
    """
    Full eigendecomposition of the graph Laplacian.

    Args:
        A_sym (numpy.ndarray): Symmetric adjacency
        kind (str): "normalized" or "unnormalized"

    Returns:
        SpectralDecomposition: Ascending eigenvalues and sign-fixed orthonormal eigenvectors
    """
    L = laplacian_matrix(A_sym, kind)
    eigenvalues, vectors = np.linalg.eigh(L)
    vectors = _fix_signs(vectors)
    eigenvalues, vectors = _order_clusters(eigenvalues, vectors)
    return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=vectors,
                                 laplacian_kind=kind, laplacian=L)


def _truncate_at_gap(candidates, gap_factor, min_candidates):
    """Number of candidates before the first gap larger than gap_factor x median gap"""
    if len(candidates) < min_candidates:
        return len(candidates)
    gaps = np.abs(np.diff(candidates))
    threshold = gap_factor * np.median(gaps)
    significant = np.flatnonzero(gaps > threshold)
    if len(significant) == 0:
        return len(candidates)
    return int(significant[0]) + 1


def spectral_counts(eigenvalues, tau_low=None, tau_high=None, gap_factor=None, min_candidates=None):
    """
    Low/high frequency eigenvalue counts after gap analysis.

    Returns:
        dict: {'low_count', 'high_count', 'low_raw', 'high_raw'}
    """
    settings = DEFAULT_SPECTRAL_SETTINGS
    tau_low = settings["TAU_LOW"] if tau_low is None else tau_low
    tau_high = settings["TAU_HIGH"] if tau_high is None else tau_high
    gap_factor = settings["GAP_FACTOR"] if gap_factor is None else gap_factor
    min_candidates = settings["MIN_GAP_CANDIDATES"] if min_candidates is None else min_candidates

    eigenvalues = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    # The first eigenvalue is never a candidate
    low = eigenvalues[1:][eigenvalues[1:] <= tau_low]
    # High frequencies are taken from the top of the spectrum downward
    high = eigenvalues[eigenvalues >= tau_high][::-1]

    return {
        "low_raw": int(len(low)),
        "high_raw": int(len(high)),
        "low_count": _truncate_at_gap(low, gap_factor, min_candidates),
        "high_count": _truncate_at_gap(high, gap_factor, min_candidates),
    }


def auto_select_k(eigenvalues, min_k=None, max_k=None, **kwargs):
    """
    Automatic symmetric k selection from the normalized Laplacian spectrum.

    Args:
        eigenvalues (array-like): Ascending normalized-Laplacian eigenvalues

    Returns:
        tuple: (k_first, k_last) with k_last = k_first in [min_k, max_k]
    """
    min_k = DEFAULT_SPECTRAL_SETTINGS["MIN_K"] if min_k is None else min_k
    max_k = DEFAULT_SPECTRAL_SETTINGS["MAX_K"] if max_k is None else max_k
    counts = spectral_counts(eigenvalues, **kwargs)
    k_first = max(min_k, min(counts["low_count"], max_k))
    return k_first, k_first
