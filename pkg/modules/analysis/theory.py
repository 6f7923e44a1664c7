import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd

from config.settings import DEFAULT_SWEEP_SETTINGS
from modules.analysis.rank import effective_rank
from modules.model.transformer import FTTransformer, ModelSpec, init_params

logger = logging.getLogger(__name__)

PE_ASSIGNMENTS = ("distinct_orthogonal", "shared_within_groups", "zero")
STRUCTURES = ("iid", "two_group")
SETTING_NAMES = ("single_winner", "two_group_distinct", "two_group_shared")

# Construction checks
_GAP_TOL = 1e-9
_NORM_TOL = 1e-12


def c_alpha(alpha, tau, c_K, c_Q, c_q, d_T):
    """Attention separation constant exp((alpha*tau - 2 c_K c_Q c_q) / sqrt(d_T))"""
    if d_T <= 0:
        raise ValueError("d_T must be positive")
    return math.exp((alpha * tau - 2.0 * c_K * c_Q * c_q) / math.sqrt(d_T))


def bound_single_winner(C, d):
    """Effective-rank bound for one dominant token among d: (C + d) exp(-C/(C+d) log C)"""
    _check_bound_args(C, d)
    return (C + d) * math.exp(-C / (C + d) * math.log(C))


def bound_two_group_distinct(C, d):
    """Bound with random encodings on two-group inputs"""
    _check_bound_args(C, d)
    return (2 * C + d) * math.exp(-(2 * C * math.log(2 * C) + d * math.log(d)) / (2 * C + d))


def bound_two_group_shared(C):
    """Bound with encodings shared within each of two groups"""
    _check_bound_args(C, 1)
    return (C + 1) * math.exp(-C / (C + 1) * math.log(C))


def _check_bound_args(C, d):
    if C <= 0:
        raise ValueError("C must be positive")
    if d < 1:
        raise ValueError("d must be at least 1")


def large_c_approximation(name, C, d):
    """Large-C limits: 1 + d/C, 1 + d/(2C) and 1 + 1/C"""
    if name == "single_winner":
        return 1.0 + d / C
    if name == "two_group_distinct":
        return 1.0 + d / (2.0 * C)
    if name == "two_group_shared":
        return 1.0 + 1.0 / C
    raise ValueError(f"Unknown setting '{name}'")


def bound_for(name, C, d):
    if name == "single_winner":
        return bound_single_winner(C, d)
    if name == "two_group_distinct":
        return bound_two_group_distinct(C, d)
    if name == "two_group_shared":
        return bound_two_group_shared(C)
    raise ValueError(f"Unknown setting '{name}'")


@dataclass
class RankBoundSetting:
    """
    Hypotheses of a single-layer, single-head attention rank bound.

    pe_assignment "distinct_orthogonal" gives one winning token (index 0)
    whose PE score exceeds all others by tau; "shared_within_groups" gives
    the first half of the tokens one shared PE and the second half another.
    structure "two_group" feeds theta to the first half of the features and
    theta' to the second half.
    """

    d: int = 8
    d_T: int = 16
    d_p: int = 4
    tau: float = 2.0
    c_Q: float = 1.0
    c_K: float = 1.0
    c_q: float = 1.0
    alpha: float = 1.0
    pe_assignment: str = "distinct_orthogonal"
    structure: str = "iid"
    name: Optional[str] = None

    def validate(self) -> None:
        if self.pe_assignment not in PE_ASSIGNMENTS:
            raise ValueError(f"Unknown PE assignment '{self.pe_assignment}'")
        if self.structure not in STRUCTURES:
            raise ValueError(f"Unknown input structure '{self.structure}'")
        if self.d < 1 or self.d_p < 1 or self.d_T < self.d_p + 1:
            raise ValueError(f"infeasible dimensions: d={self.d}, d_T={self.d_T}, d_p={self.d_p}")
        if (self.pe_assignment == "shared_within_groups" or self.structure == "two_group") and self.d % 2:
            raise ValueError("two groups need an even d")
        if min(self.c_Q, self.c_K, self.c_q) <= 0:
            raise ValueError("norm bounds must be positive")
        if self.tau < 0 or self.alpha < 0:
            raise ValueError("tau and alpha must be nonnegative")

    @property
    def bound_name(self) -> str:
        if self.name:
            return self.name
        if self.pe_assignment == "shared_within_groups":
            return "two_group_shared"
        return "two_group_distinct" if self.structure == "two_group" else "single_winner"

    @property
    def C(self) -> float:
        return c_alpha(self.alpha, self.tau, self.c_K, self.c_Q, self.c_q, self.d_T)


def bound_setting(name, **overrides):
    """Preset settings for the three bounds"""
    presets = {
        "single_winner": {"pe_assignment": "distinct_orthogonal", "structure": "iid"},
        "two_group_distinct": {"pe_assignment": "distinct_orthogonal", "structure": "two_group"},
        "two_group_shared": {"pe_assignment": "shared_within_groups", "structure": "two_group"},
    }
    if name not in presets:
        raise ValueError(f"Unknown setting '{name}'")
    return RankBoundSetting(name=name, **{**presets[name], **overrides})


@dataclass
class RankBoundModel:
    setting: RankBoundSetting
    model: FTTransformer
    winner: int
    pe_scores: np.ndarray

    def sample_inputs(self, n_samples, seed):
        return sample_inputs(self.setting, n_samples, seed)

    def measured_rank(self, n_samples=None, seed=1):
        n_samples = n_samples or DEFAULT_SWEEP_SETTINGS["N_SAMPLES_THEORY"]
        return effective_rank(self.model.cls_embeddings(self.sample_inputs(n_samples, seed)))


def sample_inputs(setting, n_samples, seed):
    """Uniform(0, 1) inputs; two-group inputs repeat theta and theta' across each half"""
    rng = np.random.default_rng(seed)
    if setting.structure == "iid":
        return rng.uniform(0.0, 1.0, size=(n_samples, setting.d))
    half = setting.d // 2
    latent = rng.uniform(0.0, 1.0, size=(n_samples, 2))
    return np.repeat(latent, [half, setting.d - half], axis=1)


def _orthonormal_rows(n_rows, width, rng):
    if n_rows <= width:
        basis, _ = np.linalg.qr(rng.standard_normal((width, width)))
        return basis[:, :n_rows].T.copy()
    rows = rng.standard_normal((n_rows, width))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _bound_pe(setting, rng):
    d, d_p = setting.d, setting.d_p
    pe = np.zeros((d, d_p))
    if setting.pe_assignment == "zero":
        return pe
    lead = setting.tau / (setting.c_K * setting.c_Q * setting.c_q)
    if setting.pe_assignment == "distinct_orthogonal":
        # Coordinates after the first are invisible to the scores
        pe[:, 1:] = rng.standard_normal((d, d_p - 1))
        pe[0, 0] = lead
    else:
        half = d // 2
        shared = rng.standard_normal((2, d_p - 1))
        pe[:half, 1:] = shared[0]
        pe[half:, 1:] = shared[1]
        pe[:half, 0] = lead
    return pe


def construct_bound_setting(setting, seed=1):
    """
    Attention weights satisfying a rank-bound hypothesis exactly.

    Q = c_Q I, K reads only the first PE coordinate (scaled by c_K), V is the
    identity on the content block and zero on the PE block, tokenizer
    weights are orthonormal with zero bias, and the CLS content is c_q e_1.
    The unscaled PE score of the winning token exceeds every other score by
    tau; the remaining scores are equal.

    Returns:
        RankBoundModel: Forward-only model in the bare attention configuration
    """
    setting.validate()
    rng = np.random.default_rng(seed)
    d, d_t, d_p = setting.d, setting.d_T, setting.d_p
    d_c = d_t - d_p

    spec = ModelSpec(n_features=d, total_token_dim=d_t, pe_dim=d_p, n_layers=1, n_heads=1,
                     attention_dropout=0.0, ffn_dropout=0.0, residual_dropout=0.0,
                     pe_mode="fixed", alpha=setting.alpha, seed=seed, theory=True)
    params = {name: np.zeros_like(value) for name, value in init_params(spec).items()}

    params["tokenizer.weight"] = _orthonormal_rows(d, d_c, rng)
    params["cls"][0] = setting.c_q
    params["blocks.0.attn.wq"] = setting.c_Q * np.eye(d_t)
    params["blocks.0.attn.wk"][d_c, 0] = setting.c_K
    params["blocks.0.attn.wv"][:d_c, :d_c] = np.eye(d_c)
    params["blocks.0.attn.wo"] = np.eye(d_t)

    pe = _bound_pe(setting, rng)
    model = FTTransformer(spec, pe=pe, params=params)

    query = params["cls"] @ params["blocks.0.attn.wq"][:d_c]
    pe_scores = (pe @ params["blocks.0.attn.wk"][d_c:]) @ query
    _verify(setting, params, pe_scores, d_c)
    winner = int(np.argmax(pe_scores))
    return RankBoundModel(setting=setting, model=model, winner=winner, pe_scores=pe_scores)


def _verify(setting, params, pe_scores, d_c):
    if np.linalg.norm(params["blocks.0.attn.wq"], 2) > setting.c_Q + _NORM_TOL:
        raise ValueError("constructed Q violates its norm bound")
    if np.linalg.norm(params["blocks.0.attn.wk"], 2) > setting.c_K + _NORM_TOL:
        raise ValueError("constructed K violates its norm bound")
    if np.linalg.norm(params["cls"]) > setting.c_q + _NORM_TOL:
        raise ValueError("constructed q violates its norm bound")
    wv = params["blocks.0.attn.wv"]
    if np.any(wv[d_c:] != 0) or not np.allclose(wv[:d_c, :d_c].T @ wv[:d_c, :d_c], np.eye(d_c)):
        raise ValueError("constructed V is not norm preserving on the content block")
    norms = np.linalg.norm(params["tokenizer.weight"], axis=1)
    if not np.allclose(norms, norms[0]):
        raise ValueError("tokenizer weights must share one norm")

    gap = measured_score_gap(pe_scores)
    expected = 0.0 if setting.pe_assignment == "zero" else setting.tau
    if abs(gap - expected) > _GAP_TOL:
        raise ValueError(f"PE score gap {gap} differs from {expected}")


def measured_score_gap(pe_scores):
    """Top PE score minus the largest score below it (0 when all are equal)"""
    scores = np.sort(np.asarray(pe_scores, dtype=np.float64))[::-1]
    lower = scores[scores < scores[0] - _GAP_TOL]
    return float(scores[0] - lower[0]) if len(lower) else 0.0


def bound_table(setting, alpha_grid, n_samples=None, seed=1):
    """
    Measured CLS effective rank against the closed-form bound per alpha.

    Returns:
        pandas.DataFrame: alpha, c_alpha, bound, approximation, measured, holds
    """
    rows = []
    for alpha in alpha_grid:
        scaled = replace(setting, alpha=float(alpha))
        built = construct_bound_setting(scaled, seed=seed)
        C = scaled.C
        bound = bound_for(scaled.bound_name, C, scaled.d)
        measured = built.measured_rank(n_samples, seed=seed)
        rows.append({
            "alpha": float(alpha),
            "c_alpha": C,
            "bound": bound,
            "approximation": large_c_approximation(scaled.bound_name, C, scaled.d),
            "measured": measured,
            "holds": bool(measured <= bound + 1e-6),
        })
    table = pd.DataFrame(rows)
    failures = int((~table["holds"]).sum())
    if failures:
        logger.warning("%s bound violated at %d of %d alphas", setting.bound_name, failures, len(table))
    return table
