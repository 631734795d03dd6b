"""Parameter containers, initialization, closed-form counts and checkpoints."""

from __future__ import annotations

import hashlib
import json

import numpy as np

from eapred.errors import CheckpointError, InputError
from eapred.models.config import ModelConfig
from eapred.numerics import RngStream, Tensor
from eapred.store import read_arrays, write_arrays

CHECKPOINT_FORMAT = "eapred-checkpoint/1"


class ModelParams:
    def __init__(self, config, tensors):
        self.config = config
        self.tensors = dict(tensors)

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def count(self):
        return int(sum(t.data.size for t in self.tensors.values()))

    def arrays(self):
        return {k: t.data for k, t in self.tensors.items()}

    def copy(self):
        return ModelParams(self.config, {k: Tensor(t.data.copy(), requires_grad=True, name=k) for k, t in self.items()})

    def norm(self):
        return float(np.sqrt(sum(float(np.sum(t.data**2)) for t in self.tensors.values())))

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None


def param_shapes(cfg):
    """Shapes implied by the config alone, in canonical order."""
    d, T, C = cfg.input_dim, cfg.seq_len, cfg.classes
    shapes = {}
    if cfg.kind == "logreg":
        shapes["W"] = (C, T * d)
        shapes["b"] = (C,)
    elif cfg.kind == "lstm":
        H = cfg.hidden
        for layer in range(cfg.lstm_layers):
            n_in = d if layer == 0 else H
            shapes[f"lstm{layer}.W_x"] = (n_in, 4 * H)
            shapes[f"lstm{layer}.W_h"] = (H, 4 * H)
            shapes[f"lstm{layer}.b"] = (4 * H,)
        shapes["head.W"] = (H, C)
        shapes["head.b"] = (C,)
    else:
        M, F = cfg.model_dim, cfg.ff_dim
        shapes["embed.W"] = (d, M)
        shapes["embed.b"] = (M,)
        for layer in range(cfg.attn_layers):
            p = f"enc{layer}."
            for proj in ("q", "k", "v", "o"):
                shapes[p + f"W_{proj}"] = (M, M)
                shapes[p + f"b_{proj}"] = (M,)
            shapes[p + "ln1.g"] = (M,)
            shapes[p + "ln1.b"] = (M,)
            shapes[p + "ff1.W"] = (M, F)
            shapes[p + "ff1.b"] = (F,)
            shapes[p + "ff2.W"] = (F, M)
            shapes[p + "ff2.b"] = (M,)
            shapes[p + "ln2.g"] = (M,)
            shapes[p + "ln2.b"] = (M,)
        shapes["head.W"] = (M, C)
        shapes["head.b"] = (C,)
    return shapes


def expected_param_count(cfg):
    """Closed forms:

    logreg     C*T*d + C
    lstm       sum_l 4H(in_l + H + 1) + C*H + C,  in_0 = d, in_l = H
    attention  d*M + M + L*(4(M^2 + M) + 4M + 2MF + F + M) + C*M + C
    """
    d, T, C = cfg.input_dim, cfg.seq_len, cfg.classes
    if cfg.kind == "logreg":
        return C * T * d + C
    if cfg.kind == "lstm":
        H = cfg.hidden
        total = sum(4 * H * ((d if l == 0 else H) + H + 1) for l in range(cfg.lstm_layers))
        return total + C * H + C
    M, F, L = cfg.model_dim, cfg.ff_dim, cfg.attn_layers
    return d * M + M + L * (4 * (M * M + M) + 4 * M + 2 * M * F + F + M) + C * M + C


def _fan_in(cfg, name, shape):
    if cfg.kind == "logreg":
        return cfg.seq_len * cfg.input_dim
    if name.startswith("lstm"):
        layer = int(name[4 : name.index(".")])
        n_in = cfg.input_dim if layer == 0 else cfg.hidden
        return n_in + cfg.hidden
    if name.endswith(".W") or ".W_" in name:
        return shape[0]
    # biases take the fan-in of their weight matrix
    w_name = name.replace(".b_", ".W_") if ".b_" in name else name[: -len("b")] + "W"
    return param_shapes(cfg)[w_name][0]


def init_params(cfg, rng=None):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every affine map; LSTM forget bias 1; norms at identity."""
    rng = rng or RngStream(cfg.seed).substream("init")
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".g"):
            data = np.ones(shape)
        elif ".ln" in name and name.endswith(".b"):
            data = np.zeros(shape)
        else:
            limit = np.sqrt(1.0 / _fan_in(cfg, name, shape))
            data = rng.uniform(shape, -limit, limit)
            if cfg.kind == "lstm" and name.endswith(".b") and name.startswith("lstm"):
                H = cfg.hidden
                data[H : 2 * H] = 1.0
        tensors[name] = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True, name=name)
    return ModelParams(cfg, tensors)


def zero_params(cfg):
    return ModelParams(
        cfg, {k: Tensor(np.zeros(s), requires_grad=True, name=k) for k, s in param_shapes(cfg).items()}
    )


def _config_hash(cfg_dict):
    blob = json.dumps(cfg_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def save_params(path, params, rng_state=None, extra=None):
    cfg = params.config.to_dict()
    meta = {
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "rng_state": rng_state,
        "extra": extra or {},
    }
    write_arrays(path, params.arrays(), meta, CHECKPOINT_FORMAT)


def load_params(path, with_meta=False):
    try:
        arrays, meta = read_arrays(path, CHECKPOINT_FORMAT)
    except InputError as exc:
        raise CheckpointError(str(exc)) from None
    if _config_hash(meta["config"]) != meta.get("config_hash"):
        raise CheckpointError(f"{path}: config hash does not match the stored config")
    cfg = ModelConfig.from_dict(meta["config"])
    shapes = param_shapes(cfg)
    if set(shapes) != set(arrays):
        raise CheckpointError(f"{path}: tensor names do not match config {cfg.kind}")
    for name, shape in shapes.items():
        if tuple(arrays[name].shape) != tuple(shape):
            raise CheckpointError(f"{path}: {name} has shape {arrays[name].shape}, config implies {shape}")
    params = ModelParams(cfg, {k: Tensor(arrays[k].copy(), requires_grad=True, name=k) for k in shapes})
    return (params, meta) if with_meta else params
