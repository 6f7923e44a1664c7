import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import numpy as np

from config.settings import DEFAULT_MODEL_SETTINGS
from modules.model.layers import (
    dropout_mask,
    layer_norm_backward,
    layer_norm_forward,
    multihead_attention_backward,
    multihead_attention_forward,
    reglu_ffn_backward,
    reglu_ffn_forward,
)
from modules.spectral.encoding import random_pe

logger = logging.getLogger(__name__)

PE_MODES = ("none", "fixed", "random", "learnable")
TASKS = ("regression", "classification")

# Rows scored per forward call at inference time
_INFERENCE_CHUNK = 512


@dataclass
class ModelSpec:
    """
    Architecture of the feature-tokenizer transformer.

    Every token is total_token_dim wide: a content block of
    total_token_dim - pe_dim plus a positional block of pe_dim. With
    pe_mode "none" the positional block is zeros so widths match the PE runs.
    theory=True gives the bare attention configuration (no norms, no
    feed-forward, no residual, CLS excluded as a key).
    """

    n_features: int
    total_token_dim: int = DEFAULT_MODEL_SETTINGS["TOTAL_TOKEN_DIM"]
    pe_dim: int = 0
    n_layers: int = DEFAULT_MODEL_SETTINGS["N_LAYERS"]
    n_heads: int = DEFAULT_MODEL_SETTINGS["N_HEADS"]
    ffn_factor: float = DEFAULT_MODEL_SETTINGS["FFN_FACTOR"]
    attention_dropout: float = DEFAULT_MODEL_SETTINGS["ATTENTION_DROPOUT"]
    ffn_dropout: float = DEFAULT_MODEL_SETTINGS["FFN_DROPOUT"]
    residual_dropout: float = DEFAULT_MODEL_SETTINGS["RESIDUAL_DROPOUT"]
    pe_mode: str = DEFAULT_MODEL_SETTINGS["PE_MODE"]
    alpha: float = 1.0
    task: str = "regression"
    n_classes: int = 1
    seed: int = 1
    theory: bool = False
    groups: Optional[List[List[int]]] = None

    @property
    def n_nodes(self) -> int:
        if self.groups is None:
            return self.n_features
        return sum(len(group) for group in self.groups)

    @property
    def content_dim(self) -> int:
        return self.total_token_dim - self.pe_dim

    @property
    def ffn_hidden(self) -> int:
        return int(self.total_token_dim * self.ffn_factor)

    @property
    def n_outputs(self) -> int:
        return 1 if self.task == "regression" else self.n_classes

    def validate(self) -> None:
        if self.n_features < 1:
            raise ValueError("n_features must be positive")
        if self.pe_dim < 0 or self.content_dim <= 0:
            raise ValueError(f"token content dim must be positive (d_T={self.total_token_dim}, d_pe={self.pe_dim})")
        if self.total_token_dim % self.n_heads != 0:
            raise ValueError("total_token_dim must be divisible by n_heads")
        if self.pe_mode not in PE_MODES:
            raise ValueError(f"Unknown PE mode '{self.pe_mode}'")
        if self.pe_mode != "none" and self.pe_dim == 0:
            raise ValueError(f"PE mode '{self.pe_mode}' needs pe_dim > 0")
        if self.task not in TASKS:
            raise ValueError(f"Unknown task '{self.task}'")
        if self.task == "classification" and self.n_classes < 2:
            raise ValueError("classification needs at least 2 classes")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.n_layers < 1:
            raise ValueError("n_layers must be at least 1")
        if self.groups is not None:
            if len(self.groups) != self.n_features:
                raise ValueError("groups must list one node group per feature")
            if sorted(i for group in self.groups for i in group) != list(range(self.n_nodes)):
                raise ValueError("groups must partition the input columns")

    def to_dict(self):
        return asdict(self)


def membership_matrix(groups, n_nodes):
    """Binary n_nodes x n_features matrix of node-to-feature membership"""
    membership = np.zeros((n_nodes, len(groups)))
    for f, group in enumerate(groups):
        membership[list(group), f] = 1.0
    return membership


def tokenize(x, params, groups=None):
    """
    Feature tokenizer: token_i = x_i * w_i + b_i, CLS content prepended.

    With groups, a feature spanning several one-hot columns gets the single
    token sum_n x_n * w_n + b_f, i.e. an embedding lookup of its category.

    Args:
        x (numpy.ndarray): batch x n_columns
        params (dict): tokenizer.weight (n_columns x d_c), tokenizer.bias
            (n_features x d_c), cls (d_c)
        groups (list): Column indices of every feature; None means one column each

    Returns:
        numpy.ndarray: batch x (n_features + 1) x d_c content tokens
    """
    x = np.asarray(x, dtype=np.float64)
    weight, bias = params["tokenizer.weight"], params["tokenizer.bias"]
    if x.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ValueError(f"expected {weight.shape[0]} features, got shape {x.shape}")
    columns = x[:, :, None] * weight[None]
    if groups is not None:
        columns = np.einsum("bnc,nf->bfc", columns, membership_matrix(groups, weight.shape[0]))
    features = columns + bias[None]
    cls = np.broadcast_to(params["cls"], (x.shape[0], 1, weight.shape[1]))
    return np.concatenate([cls, features], axis=1)


def attach_pe(content, pe_block, mode, pe_dim=None):
    """
    Concatenate the positional block to every feature token; CLS gets zeros.

    Args:
        content (numpy.ndarray): batch x (n_features + 1) x d_c tokens
        pe_block (numpy.ndarray): n_features x d_pe rows (already scaled), ignored for "none"
        mode (str): none, fixed, random or learnable
        pe_dim (int): Width of the zero block for mode "none"

    Returns:
        numpy.ndarray: batch x (n_features + 1) x (d_c + d_pe) tokens
    """
    batch, n_tokens, _ = content.shape
    if mode not in PE_MODES:
        raise ValueError(f"Unknown PE mode '{mode}'")
    if mode == "none":
        width = pe_dim if pe_dim is not None else (0 if pe_block is None else np.shape(pe_block)[1])
        block = np.zeros((n_tokens - 1, width))
    else:
        block = np.asarray(pe_block, dtype=np.float64)
        if block.ndim != 2 or block.shape[0] != n_tokens - 1:
            raise ValueError(f"PE has {np.shape(block)[0]} rows but the batch has {n_tokens - 1} features")
        if pe_dim is not None and block.shape[1] != pe_dim:
            raise ValueError(f"PE width {block.shape[1]} does not match d_pe={pe_dim}")
    rows = np.vstack([np.zeros((1, block.shape[1])), block])
    return np.concatenate([content, np.broadcast_to(rows, (batch,) + rows.shape)], axis=2)


def _block_params(params, layer):
    prefix = f"blocks.{layer}."
    return {name[len(prefix):]: value for name, value in params.items() if name.startswith(prefix)}


def _sub(params, group):
    prefix = group + "."
    return {name[len(prefix):]: value for name, value in params.items() if name.startswith(prefix)}


def attention_forward(tokens, block_params, spec, training=False, rng=None):
    """
    One transformer block.

    Default: pre-norm attention and ReGLU feed-forward, each added back to
    the residual stream. Theory configuration: bare attention with CLS
    masked as a key, so the CLS row is the attention-weighted sum of the
    feature tokens' value vectors.

    Returns:
        numpy.ndarray: Updated tokens
        dict: Cache for backward; cache['attn']['weights'] holds attention weights
    """
    rng = rng if training else None
    attn = _sub(block_params, "attn")

    if spec.theory:
        key_mask = np.zeros(tokens.shape[1], dtype=bool)
        key_mask[0] = True
        out, attn_cache = multihead_attention_forward(tokens, attn, spec.n_heads, key_mask=key_mask,
                                                      dropout=spec.attention_dropout, rng=rng)
        return out, {"attn": attn_cache}

    h, norm1 = layer_norm_forward(tokens, block_params["attn_norm.gamma"], block_params["attn_norm.beta"])
    a, attn_cache = multihead_attention_forward(h, attn, spec.n_heads,
                                                dropout=spec.attention_dropout, rng=rng)
    mask_a = dropout_mask(a.shape, spec.residual_dropout, rng)
    x1 = tokens + (a * mask_a if mask_a is not None else a)

    h2, norm2 = layer_norm_forward(x1, block_params["ffn_norm.gamma"], block_params["ffn_norm.beta"])
    f, ffn_cache = reglu_ffn_forward(h2, _sub(block_params, "ffn"), dropout=spec.ffn_dropout, rng=rng)
    mask_f = dropout_mask(f.shape, spec.residual_dropout, rng)
    x2 = x1 + (f * mask_f if mask_f is not None else f)

    return x2, {"norm1": norm1, "attn": attn_cache, "mask_a": mask_a,
                "norm2": norm2, "ffn": ffn_cache, "mask_f": mask_f}


def attention_backward(cache, d_tokens, block_params, spec):
    attn = _sub(block_params, "attn")
    grads = {}

    if spec.theory:
        d_x, attn_grads = multihead_attention_backward(cache["attn"], d_tokens, attn)
        grads.update({"attn." + k: v for k, v in attn_grads.items()})
        return d_x, grads

    d_x1 = d_tokens
    d_f = d_tokens * cache["mask_f"] if cache["mask_f"] is not None else d_tokens
    d_h2, ffn_grads = reglu_ffn_backward(cache["ffn"], d_f, _sub(block_params, "ffn"))
    d_x1n, grads["ffn_norm.gamma"], grads["ffn_norm.beta"] = layer_norm_backward(cache["norm2"], d_h2)
    d_x1 = d_x1 + d_x1n

    d_a = d_x1 * cache["mask_a"] if cache["mask_a"] is not None else d_x1
    d_h, attn_grads = multihead_attention_backward(cache["attn"], d_a, attn)
    d_x0n, grads["attn_norm.gamma"], grads["attn_norm.beta"] = layer_norm_backward(cache["norm1"], d_h)

    grads.update({"ffn." + k: v for k, v in ffn_grads.items()})
    grads.update({"attn." + k: v for k, v in attn_grads.items()})
    return d_x1 + d_x0n, grads


def init_params(spec):
    """
    Initial weights, deterministic in spec.seed.

    The learnable PE block comes from its own stream so all other weights
    are identical across PE modes.
    """
    spec.validate()
    rng = np.random.default_rng([spec.seed, 0])
    d_t, d_c, n_f = spec.total_token_dim, spec.content_dim, spec.n_features

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    params = {
        "tokenizer.weight": uniform((spec.n_nodes, d_c), d_c),
        "tokenizer.bias": uniform((n_f, d_c), d_c),
        "cls": uniform((d_c,), d_c),
    }
    for layer in range(spec.n_layers):
        prefix = f"blocks.{layer}."
        if not spec.theory:
            params[prefix + "attn_norm.gamma"] = np.ones(d_t)
            params[prefix + "attn_norm.beta"] = np.zeros(d_t)
        for name in ("q", "k", "v", "o"):
            params[prefix + f"attn.w{name}"] = uniform((d_t, d_t), d_t)
            params[prefix + f"attn.b{name}"] = np.zeros(d_t)
        if not spec.theory:
            hidden = spec.ffn_hidden
            params[prefix + "ffn_norm.gamma"] = np.ones(d_t)
            params[prefix + "ffn_norm.beta"] = np.zeros(d_t)
            params[prefix + "ffn.w1"] = uniform((d_t, 2 * hidden), d_t)
            params[prefix + "ffn.b1"] = np.zeros(2 * hidden)
            params[prefix + "ffn.w2"] = uniform((hidden, d_t), hidden)
            params[prefix + "ffn.b2"] = np.zeros(d_t)
    if not spec.theory:
        params["head_norm.gamma"] = np.ones(d_t)
        params["head_norm.beta"] = np.zeros(d_t)
    params["head.weight"] = uniform((d_t, spec.n_outputs), d_t)
    params["head.bias"] = np.zeros(spec.n_outputs)

    if spec.pe_mode == "learnable":
        pe_rng = np.random.default_rng([spec.seed, 1])
        params["pe"] = DEFAULT_MODEL_SETTINGS["LEARNABLE_PE_STD"] * pe_rng.standard_normal((n_f, spec.pe_dim))
    return params


def _unit_pe(pe):
    """Unit-scale PE values from a PEMatrix or a plain matrix"""
    if pe is None:
        return None
    if hasattr(pe, "values"):
        if pe.alpha == 0:
            raise ValueError("PE matrix was built with alpha = 0; build it with alpha > 0")
        return pe.values / pe.alpha
    return np.asarray(pe, dtype=np.float64)


class FTTransformer:
    """
    Feature-tokenizer transformer with a CLS readout and an optional PE block.

    Args:
        spec (ModelSpec): Architecture
        pe (PEMatrix or numpy.ndarray): Unit-scale encodings for pe_mode "fixed"
            (and optionally "random"); scaled by spec.alpha at attach time
        params (dict): Weights to use instead of a fresh initialization
    """

    def __init__(self, spec, pe=None, params=None):
        spec.validate()
        self.spec = spec
        self.params: Dict[str, np.ndarray] = params if params is not None else init_params(spec)
        self.pe_values: Optional[np.ndarray] = None
        self.target_mean = 0.0
        self.target_std = 1.0

        if spec.pe_mode == "fixed":
            if pe is None:
                raise ValueError("PE mode 'fixed' needs a PE matrix")
            self.pe_values = _unit_pe(pe)
        elif spec.pe_mode == "random":
            if pe is None:
                pe = random_pe((spec.n_features, spec.pe_dim), 1.0, spec.seed)
            self.pe_values = _unit_pe(pe)

        if self.pe_values is not None and self.pe_values.shape != (spec.n_features, spec.pe_dim):
            raise ValueError(f"PE shape {self.pe_values.shape} does not match "
                             f"({spec.n_features}, {spec.pe_dim})")

    def pe_block(self):
        if self.spec.pe_mode == "learnable":
            return self.params["pe"]
        if self.spec.pe_mode == "none":
            return np.zeros((self.spec.n_features, self.spec.pe_dim))
        return self.spec.alpha * self.pe_values

    def forward(self, X, training=False, rng=None):
        """
        Args:
            X (numpy.ndarray): batch x n_features inputs
            training (bool): Apply dropout (needs rng)
            rng (numpy.random.Generator): Dropout source

        Returns:
            numpy.ndarray: batch x n_outputs head outputs
            dict: Cache for backward
        """
        spec = self.spec
        X = np.asarray(X, dtype=np.float64)
        tokens = attach_pe(tokenize(X, self.params, spec.groups), self.pe_block(), spec.pe_mode, spec.pe_dim)

        block_caches = []
        for layer in range(spec.n_layers):
            tokens, block_cache = attention_forward(tokens, _block_params(self.params, layer), spec,
                                                    training=training, rng=rng)
            block_caches.append(block_cache)

        cls = tokens[:, 0, :]
        norm_cache = None
        if spec.theory:
            embedding = cls
        else:
            embedding, norm_cache = layer_norm_forward(cls, self.params["head_norm.gamma"],
                                                       self.params["head_norm.beta"])
        outputs = embedding @ self.params["head.weight"] + self.params["head.bias"]
        cache = {"X": X, "blocks": block_caches, "embedding": embedding,
                 "norm": norm_cache, "n_tokens": tokens.shape[1]}
        return outputs, cache

    def backward(self, cache, d_outputs):
        """Gradients of a scalar loss w.r.t. every parameter, given d loss / d outputs"""
        spec = self.spec
        grads = {
            "head.weight": cache["embedding"].T @ d_outputs,
            "head.bias": d_outputs.sum(axis=0),
        }
        d_embedding = d_outputs @ self.params["head.weight"].T
        if spec.theory:
            d_cls = d_embedding
        else:
            d_cls, grads["head_norm.gamma"], grads["head_norm.beta"] = layer_norm_backward(cache["norm"], d_embedding)

        X = cache["X"]
        d_tokens = np.zeros((X.shape[0], cache["n_tokens"], spec.total_token_dim))
        d_tokens[:, 0, :] = d_cls
        for layer in reversed(range(spec.n_layers)):
            d_tokens, block_grads = attention_backward(cache["blocks"][layer], d_tokens,
                                                       _block_params(self.params, layer), spec)
            grads.update({f"blocks.{layer}.{k}": v for k, v in block_grads.items()})

        d_content = d_tokens[:, 1:, :spec.content_dim]
        grads["tokenizer.bias"] = d_content.sum(axis=0)
        if spec.groups is not None:
            d_content = np.einsum("bfc,nf->bnc", d_content, membership_matrix(spec.groups, spec.n_nodes))
        grads["tokenizer.weight"] = np.einsum("bn,bnc->nc", X, d_content)
        grads["cls"] = d_tokens[:, 0, :spec.content_dim].sum(axis=0)
        if spec.pe_mode == "learnable":
            grads["pe"] = d_tokens[:, 1:, spec.content_dim:].sum(axis=0)
        return grads

    def head(self, embeddings):
        return np.asarray(embeddings) @ self.params["head.weight"] + self.params["head.bias"]

    def cls_embeddings(self, X):
        """Pre-head CLS representations, n_samples x d_T"""
        X = np.asarray(X, dtype=np.float64)
        chunks = [self.forward(X[i:i + _INFERENCE_CHUNK])[1]["embedding"]
                  for i in range(0, max(len(X), 1), _INFERENCE_CHUNK)]
        return np.vstack(chunks)

    def predict(self, X):
        """Head outputs: one standardized value (regression) or C logits per row"""
        return self.head(self.cls_embeddings(X))

    def to_target_scale(self, outputs):
        """Regression outputs back on the original target scale"""
        return np.asarray(outputs).reshape(-1) * self.target_std + self.target_mean

    def attention_weights(self, X, layer=0):
        _, cache = self.forward(X)
        return cache["blocks"][layer]["attn"]["weights"]

    def count_parameters(self) -> int:
        return int(sum(value.size for value in self.params.values()))


def count_parameters(model):
    return model.count_parameters()


def predict(model, X):
    return model.predict(X)


def cls_embeddings(model, X):
    return model.cls_embeddings(X)
