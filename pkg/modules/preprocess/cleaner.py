import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from config.settings import DEFAULT_PREPROCESS_SETTINGS
from modules.preprocess.splitter import split_stratified
from modules.preprocess.table import (
    CATEGORICAL,
    CONTINUOUS,
    FeatureTable,
    NodeMeta,
    RawTable,
    load_feature_table,
    save_feature_table,
)
from utils.helpers import atomic_write_json

logger = logging.getLogger(__name__)


@dataclass
class OneHotGroup:
    """Record of one categorical feature's binary columns"""

    feature: str
    labels: List[str]
    all_missing: bool = False


@dataclass
class PreparedData:
    """Output of the preprocessing stage: encoded table, target and split indices"""

    table: FeatureTable
    target: Optional[np.ndarray]
    task: str
    splits: Dict[str, np.ndarray]
    stats: Dict[str, object] = field(default_factory=dict)

    def split(self, name):
        """(X, y) arrays for one split"""
        rows = self.splits[name]
        y = self.target[rows] if self.target is not None else None
        return self.table.data[rows], y


def handle_missing(table, max_missing_fraction=None):
    """
    Drop mostly-missing columns, then rows with missing continuous values.

    Both steps repeat until nothing changes, so the result is a fixed point
    and a second call returns the same table.

    Args:
        table (RawTable): Raw table
        max_missing_fraction (float): Columns above this missing share are dropped

    Returns:
        RawTable: Table with no missing continuous entries
    """
    limit = DEFAULT_PREPROCESS_SETTINGS["MAX_MISSING_FRACTION"] if max_missing_fraction is None else max_missing_fraction
    frame = table.frame.copy()
    kinds = dict(table.kinds)

    while True:
        before = frame.shape

        # 1. Remove features with too many missing values
        if len(frame) > 0:
            missing_share = frame.isna().mean(axis=0)
            dropped = [col for col in frame.columns if missing_share[col] > limit]
            if dropped:
                logger.info("Dropping %d columns with >%.0f%% missing: %s",
                            len(dropped), limit * 100, ", ".join(map(str, dropped)))
                frame = frame.drop(columns=dropped)

        # 2. Listwise deletion of rows with missing continuous values
        continuous = [col for col in frame.columns if kinds[col] == CONTINUOUS]
        if continuous:
            frame = frame[~frame[continuous].isna().any(axis=1)]

        if frame.shape == before:
            break

    if len(frame) == 0:
        raise ValueError("all rows deleted")

    frame = frame.reset_index(drop=True)
    return RawTable(frame, {col: kinds[col] for col in frame.columns})


def one_hot_encode(column, name=None, max_categories=None, top_categories=None):
    """
    One-hot encode a categorical column with cardinality reduction.

    Up to max_categories distinct values get one column each; beyond that the
    top_categories most frequent values are kept and the rest become Other.
    Missing entries get their own Missing column.

    Args:
        column (pandas.Series or list): Categorical values, None/NaN for missing
        name (str): Feature name (defaults to the Series name)

    Returns:
        pandas.DataFrame: Binary columns named "<feature>=<label>"
        OneHotGroup: Group record
    """
    max_categories = max_categories or DEFAULT_PREPROCESS_SETTINGS["MAX_CATEGORIES"]
    top_categories = top_categories or DEFAULT_PREPROCESS_SETTINGS["TOP_CATEGORIES"]
    other_label = DEFAULT_PREPROCESS_SETTINGS["OTHER_LABEL"]
    missing_label = DEFAULT_PREPROCESS_SETTINGS["MISSING_LABEL"]

    series = pd.Series(column, dtype=object)
    feature = name if name is not None else (series.name if series.name is not None else "feature")
    if len(series) == 0:
        raise ValueError("no data")

    missing = series.isna().to_numpy()
    values = series.where(~series.isna(), None).map(lambda v: None if v is None else str(v))

    if missing.all():
        logger.warning("Categorical column %s is entirely missing", feature)
        frame = pd.DataFrame({f"{feature}={missing_label}": np.ones(len(series))})
        return frame, OneHotGroup(str(feature), [missing_label], all_missing=True)

    counts = values[~missing].value_counts()
    # Frequency ties broken by label for a deterministic top list
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))

    if len(ranked) <= max_categories:
        kept = sorted(label for label, _ in ranked)
        use_other = False
    else:
        kept = sorted(label for label, _ in ranked[:top_categories])
        use_other = True

    labels = list(kept) + ([other_label] if use_other else []) + ([missing_label] if missing.any() else [])
    encoded = np.zeros((len(series), len(labels)))
    index = {label: j for j, label in enumerate(kept)}

    for i, value in enumerate(values):
        if missing[i]:
            encoded[i, labels.index(missing_label)] = 1.0
        elif value in index:
            encoded[i, index[value]] = 1.0
        else:
            encoded[i, len(kept)] = 1.0

    frame = pd.DataFrame(encoded, columns=[f"{feature}={label}" for label in labels])
    return frame, OneHotGroup(str(feature), labels)


def standardize(column, stats=None, constant_std=None):
    """
    Standardize a continuous column to zero mean and unit (population) variance.

    Args:
        column (array-like): Numeric values without missing entries
        stats (tuple): Optional (mean, std) to apply instead of fitting

    Returns:
        numpy.ndarray: Standardized values
        dict: {'mean', 'std', 'constant'}
    """
    tol = DEFAULT_PREPROCESS_SETTINGS["CONSTANT_STD"] if constant_std is None else constant_std
    values = np.asarray(column, dtype=np.float64)

    if stats is None:
        mean = float(values.mean())
        std = float(values.std())
    else:
        mean, std = float(stats[0]), float(stats[1])

    if std < tol:
        return np.zeros_like(values), {"mean": mean, "std": std, "constant": True}
    return (values - mean) / std, {"mean": mean, "std": std, "constant": False}


def preprocess_table(raw, target=None, task="regression", ratios=None, seed=1):
    """
    Turn a raw table into a standardized FeatureTable with train/val/test splits.

    Standardization statistics are fitted on the train split only and then
    applied to every row.

    Args:
        raw (RawTable): Raw table including the target column if given
        target (str): Target column name (None for unsupervised use)
        task (str): "regression" or "classification"
        ratios (tuple): (train, val, test) ratios
        seed (int): Split seed

    Returns:
        PreparedData: Encoded table, target, split indices and cleaning statistics
    """
    ratios = ratios or DEFAULT_PREPROCESS_SETTINGS["SPLIT_RATIOS"]
    initial_rows, initial_cols = raw.n_rows, len(raw.columns)

    # 1. Rows without a target value are unusable
    frame = raw.frame
    if target is not None:
        if target not in frame.columns:
            raise ValueError(f"Target column {target} not found")
        frame = frame[frame[target].notna()]
    working = RawTable(frame.reset_index(drop=True).copy(), dict(raw.kinds))

    # 2. Missing value handling on the feature columns
    feature_cols = [col for col in working.columns if col != target]
    cleaned = handle_missing(working.select(columns=feature_cols + ([target] if target else [])))
    feature_cols = [col for col in cleaned.columns if col != target]
    if not feature_cols:
        raise ValueError("no feature columns left after missing-value handling")

    # 3. Target encoding and split
    y = None
    labels = None
    class_names = None
    if target is not None:
        raw_target = cleaned.frame[target]
        if task == "classification":
            class_names = sorted(raw_target.astype(str).unique())
            y = raw_target.astype(str).map({c: i for i, c in enumerate(class_names)}).to_numpy(dtype=int)
            labels = y
        else:
            y = pd.to_numeric(raw_target, errors="raise").to_numpy(dtype=np.float64)
    train_idx, val_idx, test_idx = split_stratified(cleaned.n_rows, labels, ratios, seed)

    # 4. Column encoding
    blocks, columns, node_meta, groups = [], [], [], []
    stats, constant = {}, []
    for col in feature_cols:
        start = len(columns)
        if cleaned.kinds[col] == CATEGORICAL:
            encoded, group = one_hot_encode(cleaned.frame[col], name=col)
            blocks.append(encoded.to_numpy())
            columns.extend(encoded.columns)
            node_meta.extend(NodeMeta(str(col), label) for label in group.labels)
        else:
            values = cleaned.frame[col].to_numpy(dtype=np.float64)
            _, fitted = standardize(values[train_idx])
            scaled, _ = standardize(values, stats=(fitted["mean"], fitted["std"]))
            if fitted["constant"]:
                logger.warning("Continuous column %s is constant on the train split", col)
                constant.append(str(col))
            stats[str(col)] = (fitted["mean"], fitted["std"])
            blocks.append(scaled[:, None])
            columns.append(str(col))
            node_meta.append(NodeMeta(str(col), None))
        groups.append(list(range(start, len(columns))))

    table = FeatureTable(
        data=np.hstack(blocks),
        columns=columns,
        node_meta=node_meta,
        groups=groups,
        standardization_stats=stats,
        constant_columns=constant,
    )

    cleaning_stats = {
        "initial_count": initial_rows,
        "initial_columns": initial_cols,
        "dropped_columns": [c for c in raw.columns if c not in cleaned.columns],
        "rows_removed": initial_rows - cleaned.n_rows,
        "constant_columns": constant,
        "final_count": cleaned.n_rows,
        "n_nodes": table.n_nodes,
        "n_features": table.n_features,
        "class_names": class_names,
    }
    logger.info("Preprocessed %d rows into %d nodes (%d features)",
                cleaned.n_rows, table.n_nodes, table.n_features)

    return PreparedData(
        table=table,
        target=y,
        task=task,
        splits={"train": train_idx, "val": val_idx, "test": test_idx},
        stats=cleaning_stats,
    )


def save_prepared_data(data, path):
    """
    Persist PreparedData: the FeatureTable CSV plus a JSON file with target and splits.

    Returns:
        tuple: (table path, split file path)
    """
    path = Path(path)
    table_path, _ = save_feature_table(data.table, path)
    split_path = path.with_name(path.stem + "_splits.json")
    atomic_write_json(split_path, {
        "task": data.task,
        "target": None if data.target is None else data.target.tolist(),
        "splits": {name: rows.tolist() for name, rows in data.splits.items()},
        "stats": data.stats,
    })
    return table_path, split_path


def load_prepared_data(path):
    path = Path(path)
    meta = json.loads(path.with_name(path.stem + "_splits.json").read_text(encoding="utf-8"))
    target = meta["target"]
    if target is not None:
        target = np.asarray(target, dtype=int if meta["task"] == "classification" else np.float64)
    return PreparedData(
        table=load_feature_table(path),
        target=target,
        task=meta["task"],
        splits={name: np.asarray(rows, dtype=int) for name, rows in meta["splits"].items()},
        stats=meta.get("stats", {}),
    )
