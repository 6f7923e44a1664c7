"""
Forward and backward passes of the transformer building blocks.

Every forward returns (output, cache); the matching backward takes the
cache and the upstream gradient and returns (input gradient, parameter
gradients). Arrays are float64 with the token axis second to last.
"""

import numpy as np

LAYER_NORM_EPS = 1e-5


def linear_forward(x, weight, bias):
    return x @ weight + bias, x


def linear_backward(cache, d_out, weight):
    x = cache
    d_weight = x.reshape(-1, x.shape[-1]).T @ d_out.reshape(-1, d_out.shape[-1])
    d_bias = d_out.reshape(-1, d_out.shape[-1]).sum(axis=0)
    return d_out @ weight.T, d_weight, d_bias


def layer_norm_forward(x, gamma, beta, eps=LAYER_NORM_EPS):
    mean = x.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + eps)
    x_hat = (x - mean) * inv_std
    return gamma * x_hat + beta, (x_hat, inv_std, gamma)


def layer_norm_backward(cache, d_out):
    x_hat, inv_std, gamma = cache
    width = x_hat.shape[-1]
    d_gamma = (d_out * x_hat).reshape(-1, width).sum(axis=0)
    d_beta = d_out.reshape(-1, width).sum(axis=0)
    d_hat = d_out * gamma
    d_x = inv_std / width * (
        width * d_hat
        - d_hat.sum(axis=-1, keepdims=True)
        - x_hat * (d_hat * x_hat).sum(axis=-1, keepdims=True)
    )
    return d_x, d_gamma, d_beta


def softmax(scores, axis=-1):
    shifted = scores - scores.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=axis, keepdims=True)


def dropout_mask(shape, rate, rng):
    """Inverted-dropout multiplier, or None when dropout is inactive"""
    if rng is None or rate <= 0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _split_heads(x, n_heads):
    batch, n_tokens, width = x.shape
    return x.reshape(batch, n_tokens, n_heads, width // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    batch, n_heads, n_tokens, head_dim = x.shape
    return x.transpose(0, 2, 1, 3).reshape(batch, n_tokens, n_heads * head_dim)


def multihead_attention_forward(h, params, n_heads, key_mask=None, dropout=0.0, rng=None):
    """
    Scaled dot-product self-attention: softmax(QK^T / sqrt(d_head)) V per head.

    Args:
        h (numpy.ndarray): batch x tokens x width input
        params (dict): wq, bq, wk, bk, wv, bv, wo, bo
        n_heads (int): Number of heads (width must be divisible)
        key_mask (numpy.ndarray): Boolean per token, True excludes it as a key
        dropout (float): Attention-weight dropout rate
        rng (numpy.random.Generator): Dropout source; None disables dropout

    Returns:
        numpy.ndarray: batch x tokens x width output
        dict: Cache holding the attention weights under 'weights'
    """
    head_dim = h.shape[-1] // n_heads
    scale = 1.0 / np.sqrt(head_dim)

    q = _split_heads(h @ params["wq"] + params["bq"], n_heads)
    k = _split_heads(h @ params["wk"] + params["bk"], n_heads)
    v = _split_heads(h @ params["wv"] + params["bv"], n_heads)

    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    if key_mask is not None:
        scores = np.where(np.asarray(key_mask)[None, None, None, :], -np.inf, scores)
    weights = softmax(scores)

    mask = dropout_mask(weights.shape, dropout, rng)
    dropped = weights * mask if mask is not None else weights
    heads = dropped @ v
    merged = _merge_heads(heads)
    out = merged @ params["wo"] + params["bo"]

    cache = {
        "h": h, "q": q, "k": k, "v": v, "weights": weights, "dropped": dropped,
        "mask": mask, "merged": merged, "scale": scale, "n_heads": n_heads,
    }
    return out, cache


def multihead_attention_backward(cache, d_out, params):
    h, q, k, v = cache["h"], cache["q"], cache["k"], cache["v"]
    weights, dropped, mask = cache["weights"], cache["dropped"], cache["mask"]
    width = h.shape[-1]
    flat_h = h.reshape(-1, width)

    grads = {
        "wo": cache["merged"].reshape(-1, width).T @ d_out.reshape(-1, width),
        "bo": d_out.reshape(-1, width).sum(axis=0),
    }
    d_heads = _split_heads(d_out @ params["wo"].T, cache["n_heads"])

    d_dropped = d_heads @ v.transpose(0, 1, 3, 2)
    d_v = dropped.transpose(0, 1, 3, 2) @ d_heads
    d_weights = d_dropped * mask if mask is not None else d_dropped
    d_scores = weights * (d_weights - (d_weights * weights).sum(axis=-1, keepdims=True))
    d_scores = d_scores * cache["scale"]
    d_q = d_scores @ k
    d_k = d_scores.transpose(0, 1, 3, 2) @ q

    d_h = np.zeros_like(h)
    for name, d_proj in (("q", d_q), ("k", d_k), ("v", d_v)):
        flat = _merge_heads(d_proj)
        grads["w" + name] = flat_h.T @ flat.reshape(-1, width)
        grads["b" + name] = flat.reshape(-1, width).sum(axis=0)
        d_h += flat @ params["w" + name].T
    return d_h, grads


def reglu_ffn_forward(h, params, dropout=0.0, rng=None):
    """Feed-forward block: (a * relu(g)) W2 + b2 with [a, g] = h W1 + b1"""
    hidden = h @ params["w1"] + params["b1"]
    half = hidden.shape[-1] // 2
    a, g = hidden[..., :half], hidden[..., half:]
    gate = np.maximum(g, 0.0)
    r = a * gate
    mask = dropout_mask(r.shape, dropout, rng)
    r_dropped = r * mask if mask is not None else r
    out = r_dropped @ params["w2"] + params["b2"]
    return out, {"h": h, "a": a, "g": g, "gate": gate, "r": r_dropped, "mask": mask}


def reglu_ffn_backward(cache, d_out, params):
    h = cache["h"]
    width = h.shape[-1]
    r = cache["r"]
    grads = {
        "w2": r.reshape(-1, r.shape[-1]).T @ d_out.reshape(-1, d_out.shape[-1]),
        "b2": d_out.reshape(-1, d_out.shape[-1]).sum(axis=0),
    }
    d_r = d_out @ params["w2"].T
    if cache["mask"] is not None:
        d_r = d_r * cache["mask"]
    d_a = d_r * cache["gate"]
    d_g = d_r * cache["a"] * (cache["g"] > 0)
    d_hidden = np.concatenate([d_a, d_g], axis=-1)
    grads["w1"] = h.reshape(-1, width).T @ d_hidden.reshape(-1, d_hidden.shape[-1])
    grads["b1"] = d_hidden.reshape(-1, d_hidden.shape[-1]).sum(axis=0)
    return d_hidden @ params["w1"].T, grads
