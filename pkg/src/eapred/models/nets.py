"""Forward passes for the three classifiers.

Each ``*_logits`` function maps a batch ``X`` of shape (B, T, d) to a (B, C)
logit tensor built on the autodiff engine; ``training`` enables dropout, which
draws from ``rng``.
"""

from __future__ import annotations

import numpy as np

from eapred import numerics as nx
from eapred.errors import DimensionError
from eapred.numerics import Tensor


def _check_input(X, cfg):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1:] != (cfg.seq_len, cfg.input_dim):
        raise DimensionError(f"window shape {X.shape[-2:]} does not match config ({cfg.seq_len}, {cfg.input_dim})")
    return X


def logreg_logits(params, X, training=False, rng=None):
    cfg = params.config
    X = _check_input(X, cfg)
    flat = Tensor(X.reshape(X.shape[0], -1))
    return nx.add(nx.matmul(flat, nx.transpose(params["W"])), params["b"])


def lstm_logits(params, X, training=False, rng=None, return_states=False):
    cfg = params.config
    X = _check_input(X, cfg)
    B, T, _ = X.shape
    H = cfg.hidden
    inputs = [Tensor(X[:, t, :]) for t in range(T)]
    for layer in range(cfg.lstm_layers):
        W_x, W_h, b = params[f"lstm{layer}.W_x"], params[f"lstm{layer}.W_h"], params[f"lstm{layer}.b"]
        if layer > 0 and training and cfg.dropout > 0:
            inputs = [nx.dropout(h, cfg.dropout, True, rng) for h in inputs]
        h = Tensor(np.zeros((B, H)))
        c = Tensor(np.zeros((B, H)))
        outputs = []
        for x_t in inputs:
            z = nx.add(nx.add(nx.matmul(x_t, W_x), nx.matmul(h, W_h)), b)
            s = nx.sigmoid(z)
            i_gate = s[:, :H]
            f_gate = s[:, H : 2 * H]
            o_gate = s[:, 3 * H :]
            g = nx.tanh(z[:, 2 * H : 3 * H])
            c = nx.add(nx.mul(f_gate, c), nx.mul(i_gate, g))
            h = nx.mul(o_gate, nx.tanh(c))
            outputs.append(h)
        inputs = outputs
    logits = nx.add(nx.matmul(h, params["head.W"]), params["head.b"])
    if return_states:
        return logits, inputs
    return logits


def positional_encoding(T, dim):
    """Sinusoidal table: sin on even channels, cos on odd, frequency 10000^(2i/dim)."""
    pos = np.arange(T)[:, None]
    i = np.arange(0, dim, 2)[None, :]
    angle = pos / np.power(10000.0, i / dim)
    pe = np.zeros((T, dim))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : dim // 2])
    return pe


def attention_logits(params, X, training=False, rng=None, attention_out=None):
    """Post-norm encoder; pass a list as ``attention_out`` to collect per-layer (B, heads, T, T) weights."""
    cfg = params.config
    X = _check_input(X, cfg)
    B, T, _ = X.shape
    M, nh = cfg.model_dim, cfg.heads
    dk = M // nh
    scale = 1.0 / np.sqrt(dk)
    drop = training and cfg.dropout > 0

    h = nx.add(nx.matmul(Tensor(X), params["embed.W"]), params["embed.b"])
    if cfg.positional_encoding:
        h = nx.add(h, positional_encoding(T, M))
    for layer in range(cfg.attn_layers):
        p = f"enc{layer}."

        def heads(name):
            proj = nx.add(nx.matmul(h, params[p + f"W_{name}"]), params[p + f"b_{name}"])
            return nx.transpose(nx.reshape(proj, (B, T, nh, dk)), (0, 2, 1, 3))

        q, k, v = heads("q"), heads("k"), heads("v")
        scores = nx.mul(nx.matmul(q, nx.transpose(k, (0, 1, 3, 2))), scale)
        weights = nx.softmax(scores, axis=-1)
        if attention_out is not None:
            attention_out.append(weights.data.copy())
        if drop:
            weights = nx.dropout(weights, cfg.dropout, True, rng)
        ctx = nx.reshape(nx.transpose(nx.matmul(weights, v), (0, 2, 1, 3)), (B, T, M))
        attn = nx.add(nx.matmul(ctx, params[p + "W_o"]), params[p + "b_o"])
        h = nx.layer_norm(nx.add(h, attn), params[p + "ln1.g"], params[p + "ln1.b"])
        ff = nx.relu(nx.add(nx.matmul(h, params[p + "ff1.W"]), params[p + "ff1.b"]))
        ff = nx.add(nx.matmul(ff, params[p + "ff2.W"]), params[p + "ff2.b"])
        if drop:
            ff = nx.dropout(ff, cfg.dropout, True, rng)
        h = nx.layer_norm(nx.add(h, ff), params[p + "ln2.g"], params[p + "ln2.b"])
    pooled = nx.mean(h, axis=1)
    return nx.add(nx.matmul(pooled, params["head.W"]), params["head.b"])


FORWARD = {"logreg": logreg_logits, "lstm": lstm_logits, "attention": attention_logits}


def logits(params, X, training=False, rng=None):
    return FORWARD[params.config.kind](params, X, training=training, rng=rng)
