"""Mini-batch training with Adam, plus a full-batch L-BFGS option for the baseline."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from eapred.errors import ConfigError, NumericalError, TrainingAbort
from eapred.evaluation import confusion, metrics
from eapred.models import ModelConfig, init_params, logits, predict_proba, save_params
from eapred.numerics import RngStream
from eapred.training.adam import AdamState, adam_step
from eapred.training.loss import weighted_ce_logits

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    batch_size: int = 8
    epochs: int = 15
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0
    optimizer: str = "adam"
    lbfgs_maxiter: int = 200

    def __post_init__(self):
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("learning_rate >= 0, batch_size >= 1 and epochs >= 1 required")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigError("Adam betas must lie in [0, 1) and eps > 0")
        if self.optimizer not in ("adam", "lbfgs"):
            raise ConfigError(f"optimizer must be 'adam' or 'lbfgs', got {self.optimizer!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None
    val_macro_f1: float | None
    wall_time: float


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)

    def append(self, rec):
        self.epochs.append(rec)

    def deterministic_view(self):
        """Records without wall-clock time, for reproducibility comparisons."""
        return [(r.epoch, r.train_loss, r.val_loss, r.val_macro_f1) for r in self.epochs]

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for r in self.epochs:
                fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")

    @classmethod
    def read_jsonl(cls, path):
        out = cls()
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    out.append(EpochRecord(**json.loads(line)))
        return out


def epoch_permutation(seed, epoch, n):
    """Shuffle order for one epoch; depends only on ``(seed, epoch)``."""
    return RngStream(seed).substream("shuffle", epoch).permutation(n)


def dataset_loss(params, X, y, spec, batch_size=256):
    if len(X) == 0:
        return None
    total = 0.0
    for s in range(0, len(X), batch_size):
        xb, yb = X[s : s + batch_size], y[s : s + batch_size]
        total += weighted_ce_logits(logits(params, xb), yb, spec).item() * len(xb)
    return total / len(X)


def _val_stats(params, val, spec):
    if val is None or len(val[0]) == 0:
        return None, None
    Xv, yv = val
    loss = dataset_loss(params, Xv, yv, spec)
    pred = np.argmax(predict_proba(params, Xv), axis=1)
    return loss, metrics(confusion(yv, pred)).macro_f1


def train(model_config, train_data, loss_spec, config=None, val_data=None, run_dir=None, params=None, on_epoch_end=None):
    """Fit a classifier and return ``(params, TrainLog)``.

    ``train_data`` and ``val_data`` are ``(X, y)`` pairs.  ``on_epoch_end(epoch,
    params)`` may return True to stop early (used by sanity checks; the
    default schedule always runs the configured number of epochs).
    """
    config = config or TrainConfig()
    if isinstance(model_config, str):
        X0 = np.asarray(train_data[0])
        model_config = ModelConfig(kind=model_config, input_dim=X0.shape[2], seq_len=X0.shape[1], seed=config.seed)
    X, y = np.asarray(train_data[0], dtype=np.float64), np.asarray(train_data[1], dtype=np.int64)
    if len(X) == 0:
        raise ConfigError("training set is empty")
    params = params or init_params(model_config)
    if config.optimizer == "lbfgs":
        return _train_lbfgs(params, X, y, loss_spec, config, val_data)

    ckpt_dir = None
    if run_dir is not None and config.checkpoint_every > 0:
        ckpt_dir = Path(run_dir) / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    state = AdamState.like(params.arrays())
    dropout_rng = RngStream(config.seed).substream("dropout")
    log_ = TrainLog()
    n = len(X)
    steps = math.ceil(n / config.batch_size)
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = epoch_permutation(config.seed, epoch, n)
        total = 0.0
        for step in range(steps):
            idx = order[step * config.batch_size : (step + 1) * config.batch_size]
            try:
                loss = weighted_ce_logits(logits(params, X[idx], training=True, rng=dropout_rng), y[idx], loss_spec)
                loss.backward()
                grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in params.items()}
                adam_step(params.arrays(), grads, state, config.learning_rate, config.beta1, config.beta2, config.eps)
            except NumericalError as exc:
                raise TrainingAbort(f"epoch {epoch}: {exc}", batch_ids=idx.tolist(), param_norm=params.norm()) from exc
            total += loss.item() * len(idx)
        val_loss, val_f1 = _val_stats(params, val_data, loss_spec)
        rec = EpochRecord(epoch + 1, total / n, val_loss, val_f1, time.perf_counter() - t0)
        log_.append(rec)
        log.info("epoch %d train_loss=%.5f val_loss=%s val_f1=%s", rec.epoch, rec.train_loss, val_loss, val_f1)
        if ckpt_dir is not None and (epoch + 1) % config.checkpoint_every == 0:
            save_params(ckpt_dir / f"epoch_{epoch + 1:03d}.ckpt", params, dropout_rng.get_state())
        if on_epoch_end is not None and on_epoch_end(epoch + 1, params):
            break
    return params, log_


def _train_lbfgs(params, X, y, spec, config, val_data):
    from scipy.optimize import minimize

    names = list(params.tensors)
    shapes = [params[k].data.shape for k in names]
    sizes = [int(np.prod(s)) for s in shapes]

    def unpack(vec):
        off = 0
        for k, s, sz in zip(names, shapes, sizes):
            params[k].data[...] = vec[off : off + sz].reshape(s)
            off += sz

    def objective(vec):
        unpack(vec)
        loss = weighted_ce_logits(logits(params, X), y, spec)
        loss.backward()
        grad = np.concatenate([params[k].grad.reshape(-1) for k in names])
        return loss.item(), grad

    t0 = time.perf_counter()
    x0 = np.concatenate([params[k].data.reshape(-1) for k in names])
    res = minimize(objective, x0, jac=True, method="L-BFGS-B", options={"maxiter": config.lbfgs_maxiter})
    unpack(res.x)
    val_loss, val_f1 = _val_stats(params, val_data, spec)
    log_ = TrainLog()
    log_.append(EpochRecord(1, float(res.fun), val_loss, val_f1, time.perf_counter() - t0))
    return params, log_


def train_accuracy(params, X, y):
    return float(np.mean(np.argmax(predict_proba(params, X), axis=1) == np.asarray(y)))
