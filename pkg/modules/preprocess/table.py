import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config.settings import DEFAULT_PREPROCESS_SETTINGS
from utils.helpers import atomic_write_dataframe, atomic_write_json

logger = logging.getLogger(__name__)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


@dataclass
class RawTable:
    """
    Raw mixed-type table: one pandas column per feature, missing entries as NaN/None.

    Args:
        frame (pandas.DataFrame): Raw values, one column per feature
        kinds (dict): Column name -> "categorical" or "continuous"
    """

    frame: pd.DataFrame
    kinds: Dict[str, str]

    def __post_init__(self) -> None:
        unknown = [col for col in self.frame.columns if col not in self.kinds]
        if unknown:
            raise ValueError(f"Missing kind for columns: {', '.join(map(str, unknown))}")
        for col in self.frame.columns:
            kind = self.kinds[col]
            if kind not in (CATEGORICAL, CONTINUOUS):
                raise ValueError(f"Unknown kind '{kind}' for column {col}")
            if kind == CONTINUOUS:
                values = self.frame[col]
                converted = pd.to_numeric(values, errors="coerce")
                if (converted.isna() & values.notna()).any():
                    raise ValueError(f"Continuous column {col} contains non-numeric entries")
                self.frame[col] = converted.astype(float)
        self.kinds = {col: self.kinds[col] for col in self.frame.columns}

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    @property
    def columns(self) -> List[str]:
        return list(self.frame.columns)

    def select(self, columns=None, rows=None) -> "RawTable":
        frame = self.frame
        if columns is not None:
            frame = frame[list(columns)]
        if rows is not None:
            frame = frame.loc[rows]
        frame = frame.reset_index(drop=True)
        return RawTable(frame.copy(), {col: self.kinds[col] for col in frame.columns})


@dataclass(frozen=True)
class NodeMeta:
    """Links a processed column back to its original feature"""

    original_feature: str
    category_label: Optional[str] = None


@dataclass
class FeatureTable:
    """
    Standardized numeric matrix plus per-column node metadata.

    groups partitions the column indices into one-hot groups (singletons for
    continuous features), in original-feature order.
    """

    data: np.ndarray
    columns: List[str]
    node_meta: List[NodeMeta]
    groups: List[List[int]]
    standardization_stats: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    constant_columns: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise ValueError("data must be a 2-D matrix with one column per name")
        if len(self.node_meta) != len(self.columns):
            raise ValueError("node_meta must have one record per column")
        covered = sorted(i for group in self.groups for i in group)
        if covered != list(range(len(self.columns))):
            raise ValueError("groups must partition the column indices")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.data.shape[1]

    @property
    def n_features(self) -> int:
        return len(self.groups)

    @property
    def feature_names(self) -> List[str]:
        return [self.node_meta[group[0]].original_feature for group in self.groups]

    def group_matrix(self) -> np.ndarray:
        """Binary (n_nodes x n_features) membership matrix"""
        membership = np.zeros((self.n_nodes, self.n_features))
        for f, group in enumerate(self.groups):
            membership[group, f] = 1.0
        return membership

    def take(self, rows) -> "FeatureTable":
        """Row subset sharing metadata and statistics"""
        return FeatureTable(
            data=self.data[np.asarray(rows, dtype=int)],
            columns=list(self.columns),
            node_meta=list(self.node_meta),
            groups=[list(g) for g in self.groups],
            standardization_stats=dict(self.standardization_stats),
            constant_columns=list(self.constant_columns),
        )


def infer_kind(values):
    """Continuous if every non-missing entry parses as a number"""
    present = values.dropna()
    if len(present) == 0:
        return CATEGORICAL
    parsed = pd.to_numeric(present, errors="coerce")
    return CONTINUOUS if parsed.notna().all() else CATEGORICAL


def read_raw_csv(path, kinds=None, missing_markers=None):
    """
    Read a CSV with a header row into a RawTable.

    Args:
        path (str or Path): CSV file path
        kinds (dict): Optional column -> kind declarations; others are inferred
        missing_markers (list): Field values treated as missing

    Returns:
        RawTable: Raw table with missing entries as None
    """
    markers = missing_markers or DEFAULT_PREPROCESS_SETTINGS["MISSING_MARKERS"]
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df = df.apply(lambda col: col.map(lambda v: None if v.strip() in markers else v.strip()))

    declared = dict(kinds or {})
    resolved = {}
    for col in df.columns:
        resolved[col] = declared.get(col) or infer_kind(df[col])
    logger.info("Read %d rows x %d columns from %s", len(df), len(df.columns), path)
    return RawTable(df, resolved)


def save_feature_table(table, path):
    """
    Save a FeatureTable as CSV data plus a JSON metadata sidecar.

    Returns:
        tuple: (data path, sidecar path)
    """
    path = Path(path)
    atomic_write_dataframe(path, pd.DataFrame(table.data, columns=table.columns))
    sidecar = path.with_suffix(".json")
    atomic_write_json(sidecar, {
        "columns": table.columns,
        "node_meta": [
            {"original_feature": m.original_feature, "category_label": m.category_label}
            for m in table.node_meta
        ],
        "groups": table.groups,
        "standardization_stats": {k: list(v) for k, v in table.standardization_stats.items()},
        "constant_columns": table.constant_columns,
    })
    return path, sidecar


def load_feature_table(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    data = pd.read_csv(path, float_precision="round_trip")
    return FeatureTable(
        data=data[meta["columns"]].to_numpy(dtype=np.float64),
        columns=meta["columns"],
        node_meta=[NodeMeta(m["original_feature"], m["category_label"]) for m in meta["node_meta"]],
        groups=meta["groups"],
        standardization_stats={k: tuple(v) for k, v in meta["standardization_stats"].items()},
        constant_columns=meta.get("constant_columns", []),
    )
