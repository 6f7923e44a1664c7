import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config.settings import DEFAULT_SPECTRAL_SETTINGS
from modules.spectral.laplacian import auto_select_k, laplacian, spectral_counts, symmetrize
from utils.helpers import atomic_write_dataframe, atomic_write_json

logger = logging.getLogger(__name__)

# Columns with less variance than this carry no positional signal
_MIN_COLUMN_VARIANCE = 1e-12


@dataclass
class PEMatrix:
    """
    Positional encodings, one row per node (or per original feature once consolidated).

    values already include the alpha factor.
    """

    values: np.ndarray
    alpha: float
    k_first: int
    k_last: int
    consolidated: bool = False
    laplacian_kind: Optional[str] = None
    source_hash: Optional[str] = None
    zeroed_columns: List[int] = field(default_factory=list)
    row_names: Optional[List[str]] = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("PE values must be a 2-D matrix")
        if self.values.shape[1] != self.k_first + self.k_last:
            raise ValueError("PE column count must equal k_first + k_last")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def with_alpha(self, alpha) -> "PEMatrix":
        """Rescale to a new alpha (unit-variance columns are recovered from the stored ones)"""
        if self.alpha == 0:
            raise ValueError("cannot rescale a PE matrix built with alpha = 0")
        return PEMatrix(self.values / self.alpha * alpha, alpha, self.k_first, self.k_last,
                        consolidated=self.consolidated, laplacian_kind=self.laplacian_kind,
                        source_hash=self.source_hash, zeroed_columns=list(self.zeroed_columns),
                        row_names=self.row_names)


def standardize_columns(values):
    """
    Zero-mean, unit population variance per column.

    Returns:
        numpy.ndarray: Standardized copy
        list: Indices of near-constant columns that were set to zero
    """
    values = np.array(values, dtype=np.float64)
    zeroed = []
    for j in range(values.shape[1]):
        column = values[:, j] - values[:, j].mean()
        variance = column.var()
        if variance < _MIN_COLUMN_VARIANCE:
            values[:, j] = 0.0
            zeroed.append(j)
        else:
            values[:, j] = column / np.sqrt(variance)
    return values, zeroed


def build_pe(decomp, k_first, k_last, alpha):
    """
    Select the first and last Laplacian eigenvectors as positional encodings.

    The first eigenvector is skipped. Columns e_2..e_{k_first+1} and the last
    k_last eigenvectors are standardized across nodes, then scaled by alpha.

    Args:
        decomp (SpectralDecomposition): Laplacian eigenpairs
        k_first (int): Number of low-frequency eigenvectors
        k_last (int): Number of high-frequency eigenvectors
        alpha (float): PE scale factor, >= 0

    Returns:
        PEMatrix: n_nodes x (k_first + k_last) encodings
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    d = decomp.eigenvectors.shape[1]
    if k_first < 0 or k_last < 0 or k_first + k_last > d - 1:
        raise ValueError("not enough eigenvectors")

    first = list(range(1, k_first + 1))
    last = list(range(d - k_last, d))
    selected = decomp.eigenvectors[:, first + last]
    standardized, zeroed = standardize_columns(selected)
    if zeroed:
        logger.warning("Zeroed %d near-constant PE columns: %s", len(zeroed), zeroed)

    return PEMatrix(alpha * standardized, float(alpha), int(k_first), int(k_last),
                    laplacian_kind=decomp.laplacian_kind, zeroed_columns=zeroed)


def consolidate_onehot(P, groups, row_names=None):
    """
    Average node encodings within each one-hot group.

    Args:
        P (PEMatrix): One row per node
        groups (list): Lists of node indices, one per original feature

    Returns:
        PEMatrix: One row per original feature
    """
    rows = []
    for group in groups:
        if len(group) == 0:
            raise ValueError("groups must be nonempty")
        for index in group:
            if index < 0 or index >= P.n_rows:
                raise ValueError(f"group references missing node {index}")
        rows.append(P.values[list(group)].mean(axis=0))

    values = np.vstack(rows) if rows else np.zeros((0, P.width))
    return PEMatrix(values, P.alpha, P.k_first, P.k_last, consolidated=True,
                    laplacian_kind=P.laplacian_kind, source_hash=P.source_hash,
                    zeroed_columns=list(P.zeroed_columns), row_names=row_names)


def random_pe(shape, alpha, seed):
    """
    Random encodings with the same per-column statistics as build_pe.

    Returns:
        PEMatrix: shape[0] x shape[1] standardized normal samples times alpha
    """
    n_rows, width = shape
    rng = np.random.default_rng(seed)
    standardized, zeroed = standardize_columns(rng.standard_normal((n_rows, width)))
    k_first = width - width // 2
    return PEMatrix(alpha * standardized, float(alpha), k_first, width // 2,
                    laplacian_kind="random", zeroed_columns=zeroed)


def make_pe(G, groups=None, alpha=None, k="auto", laplacian_kind=None, row_names=None):
    """
    Graph to positional encodings: symmetrize, decompose, pick k, select, consolidate.

    k is chosen from the normalized Laplacian spectrum when "auto"; an
    explicit k larger than (d - 1) // 2 is clamped with a warning.

    Returns:
        PEMatrix: Consolidated encodings (one row per original feature)
        SpectralDecomposition: Eigenpairs used for the encodings
        dict: Selection details (k, counts, clamping)
    """
    alpha = DEFAULT_SPECTRAL_SETTINGS["ALPHA"] if alpha is None else alpha
    laplacian_kind = laplacian_kind or DEFAULT_SPECTRAL_SETTINGS["LAPLACIAN"]

    A_sym = symmetrize(G)
    d = A_sym.shape[0]
    decomp = laplacian(A_sym, laplacian_kind)
    normalized = decomp if laplacian_kind == "normalized" else laplacian(A_sym, "normalized")

    info: Dict[str, Any] = {"laplacian_kind": laplacian_kind, "k_mode": str(k)}
    info.update(spectral_counts(normalized.eigenvalues))
    if k == "auto":
        k_first, k_last = auto_select_k(normalized.eigenvalues)
    else:
        k_first = k_last = int(k)

    limit = (d - 1) // 2
    info["clamped"] = False
    if k_first > limit:
        logger.warning("k=%d needs %d eigenvectors but only %d are usable; clamping to %d",
                       k_first, 2 * k_first, d - 1, limit)
        k_first = k_last = limit
        info["clamped"] = True
    if k_first < 1:
        raise ValueError("not enough eigenvectors")
    info["k_first"], info["k_last"] = k_first, k_last

    P = build_pe(decomp, k_first, k_last, alpha)
    P.source_hash = G.content_hash() if hasattr(G, "content_hash") else None
    if groups is None:
        groups = [[i] for i in range(d)]
    P = consolidate_onehot(P, groups, row_names=row_names)

    logger.info("Built %dx%d PE matrix (k=%d, alpha=%g, %s Laplacian)",
                P.n_rows, P.width, k_first, alpha, laplacian_kind)
    return P, decomp, info


def save_pe(P, path):
    """
    Save a PE matrix as CSV plus a JSON metadata sidecar.

    Returns:
        tuple: (matrix path, sidecar path)
    """
    path = Path(path)
    columns = [f"first_{i + 2}" for i in range(P.k_first)] + [f"last_{i + 1}" for i in range(P.k_last)]
    df = pd.DataFrame(P.values, columns=columns)
    if P.row_names is not None:
        df.insert(0, "feature", P.row_names)
    atomic_write_dataframe(path, df)
    sidecar = path.with_suffix(".json")
    atomic_write_json(sidecar, {
        "alpha": P.alpha,
        "k_first": P.k_first,
        "k_last": P.k_last,
        "consolidated": P.consolidated,
        "laplacian_kind": P.laplacian_kind,
        "source_hash": P.source_hash,
        "zeroed_columns": P.zeroed_columns,
    })
    return path, sidecar


def load_pe(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    df = pd.read_csv(path, float_precision="round_trip")
    row_names = None
    if "feature" in df.columns:
        row_names = df.pop("feature").astype(str).tolist()
    return PEMatrix(df.to_numpy(dtype=np.float64), meta["alpha"], meta["k_first"], meta["k_last"],
                    consolidated=meta.get("consolidated", False),
                    laplacian_kind=meta.get("laplacian_kind"),
                    source_hash=meta.get("source_hash"),
                    zeroed_columns=meta.get("zeroed_columns", []),
                    row_names=row_names)
