import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd

from config.settings import DEFAULT_PREPROCESS_SETTINGS, DEFAULT_SYNTHETIC_SETTINGS
from modules.preprocess.cleaner import PreparedData, standardize
from modules.preprocess.splitter import split_stratified
from modules.preprocess.table import FeatureTable, NodeMeta
from utils.helpers import atomic_write_dataframe, atomic_write_json

logger = logging.getLogger(__name__)

# Regime boundaries as fractions of d (k <= 8, 10 <= k <= 22, k > 22 at d = 30)
HIGH_STRUCTURE_RATIO = 8 / 30
LOW_STRUCTURE_RATIO = 22 / 30


@dataclass
class SyntheticSpec:
    """Parameters of a structure-controlled regression dataset"""

    d: int = DEFAULT_SYNTHETIC_SETTINGS["D"]
    k: int = DEFAULT_SYNTHETIC_SETTINGS["K"]
    n: int = DEFAULT_SYNTHETIC_SETTINGS["N"]
    noise_std: float = DEFAULT_SYNTHETIC_SETTINGS["NOISE_STD"]
    latent_range: Tuple[float, float] = DEFAULT_SYNTHETIC_SETTINGS["LATENT_RANGE"]
    weight_range: Tuple[float, float] = DEFAULT_SYNTHETIC_SETTINGS["WEIGHT_RANGE"]
    target_group: int = DEFAULT_SYNTHETIC_SETTINGS["TARGET_GROUP"]
    seed: int = 1

    def validate(self) -> None:
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be positive")
        if self.k < 1 or self.k > self.d:
            raise ValueError(f"k must lie in [1, d], got k={self.k}, d={self.d}")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")
        if not 0 <= self.target_group < self.k:
            raise ValueError("target_group must index one of the k groups")


@dataclass
class SyntheticDataset:
    X: np.ndarray
    y: np.ndarray
    groups: List[List[int]]
    target_group: int
    theta: np.ndarray
    feature_weights: np.ndarray
    target_weight: float
    target_bias: float
    spec: SyntheticSpec = field(default_factory=SyntheticSpec)

    @property
    def feature_names(self) -> List[str]:
        return [f"x{i + 1}" for i in range(self.X.shape[1])]

    def group_of(self) -> np.ndarray:
        """Group index of every feature"""
        membership = np.empty(self.X.shape[1], dtype=int)
        for g, members in enumerate(self.groups):
            membership[members] = g
        return membership


def balanced_partition(d, k):
    """Contiguous groups of sizes ceil(d/k) first, then floor(d/k)"""
    return [chunk.tolist() for chunk in np.array_split(np.arange(d), k)]


def generate(spec):
    """
    Sample a dataset where k latent group variables drive d features.

    Feature f in group g is x_f = theta_g * w_f + noise; the target is
    y = w_t * theta_{g*} + b. Feature weights, w_t and b are drawn once.

    Args:
        spec (SyntheticSpec): Generator parameters

    Returns:
        SyntheticDataset: Features, target and ground truth
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    groups = balanced_partition(spec.d, spec.k)

    low_w, high_w = spec.weight_range
    feature_weights = rng.uniform(low_w, high_w, size=spec.d)
    target_weight, target_bias = rng.uniform(low_w, high_w, size=2)

    low_t, high_t = spec.latent_range
    theta = rng.uniform(low_t, high_t, size=(spec.n, spec.k))
    noise = rng.normal(0.0, spec.noise_std, size=(spec.n, spec.d))

    membership = np.empty(spec.d, dtype=int)
    for g, members in enumerate(groups):
        membership[members] = g
    X = theta[:, membership] * feature_weights[None, :] + noise
    y = target_weight * theta[:, spec.target_group] + target_bias

    logger.info("Generated synthetic data: n=%d, d=%d, k=%d (%s structure)",
                spec.n, spec.d, spec.k, structure_regime(spec.d, spec.k))
    return SyntheticDataset(X=X, y=y, groups=groups, target_group=spec.target_group, theta=theta,
                            feature_weights=feature_weights, target_weight=float(target_weight),
                            target_bias=float(target_bias), spec=spec)


def structure_regime(d, k):
    """
    Structure label for k groups over d features.

    Boundaries scale with k/d; at d = 30 the unlabelled k = 9 falls in the
    moderate regime.
    """
    ratio = k / d
    if ratio <= HIGH_STRUCTURE_RATIO + 1e-12:
        return "high"
    if ratio <= LOW_STRUCTURE_RATIO + 1e-12:
        return "moderate"
    return "low"


def population_correlation(w_f, w_g, noise_std=0.1, latent_range=(-2.0, 2.0)):
    """Correlation of two same-group features implied by the generator"""
    var_theta = (latent_range[1] - latent_range[0]) ** 2 / 12.0
    noise_var = noise_std ** 2
    numerator = w_f * w_g * var_theta
    return numerator / np.sqrt((w_f ** 2 * var_theta + noise_var) * (w_g ** 2 * var_theta + noise_var))


def to_prepared(dataset, ratios=None, seed=1):
    """
    Split a synthetic dataset and standardize its features on the train rows.

    Returns:
        PreparedData: Regression data ready for training
    """
    ratios = ratios or DEFAULT_PREPROCESS_SETTINGS["SPLIT_RATIOS"]
    train_idx, val_idx, test_idx = split_stratified(len(dataset.y), None, ratios, seed)
    names = dataset.feature_names

    columns, stats = [], {}
    for j, name in enumerate(names):
        _, fitted = standardize(dataset.X[train_idx, j])
        scaled, _ = standardize(dataset.X[:, j], stats=(fitted["mean"], fitted["std"]))
        columns.append(scaled)
        stats[name] = (fitted["mean"], fitted["std"])

    table = FeatureTable(
        data=np.column_stack(columns),
        columns=names,
        node_meta=[NodeMeta(name) for name in names],
        groups=[[j] for j in range(len(names))],
        standardization_stats=stats,
    )
    return PreparedData(
        table=table,
        target=dataset.y.copy(),
        task="regression",
        splits={"train": train_idx, "val": val_idx, "test": test_idx},
        stats={"final_count": len(dataset.y), "n_nodes": len(names), "n_features": len(names),
               "regime": structure_regime(dataset.spec.d, dataset.spec.k)},
    )


def save_synthetic(dataset, path):
    """
    Write features and target as CSV plus a ground-truth JSON sidecar.

    Returns:
        tuple: (data path, sidecar path)
    """
    path = Path(path)
    df = pd.DataFrame(dataset.X, columns=dataset.feature_names)
    df["y"] = dataset.y
    atomic_write_dataframe(path, df)
    sidecar = path.with_suffix(".json")
    atomic_write_json(sidecar, {
        "spec": asdict(dataset.spec),
        "groups": dataset.groups,
        "target_group": dataset.target_group,
        "feature_weights": dataset.feature_weights,
        "target_weight": dataset.target_weight,
        "target_bias": dataset.target_bias,
        "regime": structure_regime(dataset.spec.d, dataset.spec.k),
    })
    return path, sidecar
