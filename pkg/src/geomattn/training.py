"""Optimization: Adam, the plateau schedule, losses, metrics and fit loops."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, fields
from typing import Callable

import numpy as np

from . import nn
from . import tensor as T
from .datasets import BackmapData, EnvironmentSet, ForceData
from .models import Backmapper, CrystalClassifier, ForceRegressor, bond_type_values
from .tensor import Tape, Tensor

__all__ = [
    "TrainConfig",
    "AdamState",
    "adam_step",
    "Adam",
    "PlateauSchedule",
    "plateau_schedule",
    "cross_entropy",
    "mse",
    "mean_absolute_force_error",
    "accuracy",
    "fit",
    "train_classifier",
    "train_force",
    "train_backmap",
    "evaluate_classifier",
    "evaluate_force",
    "evaluate_backmap",
]

log = logging.getLogger(__name__)

LOSS_KINDS = ("cross_entropy", "force_mse", "coordinate_mse")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 800
    plateau_factor: float = 0.75
    plateau_patience: int = 20
    early_stop_patience: int = 50
    loss: str = "cross_entropy"
    precision: str = "float64"
    seed: int = 0
    max_seconds: float | None = None

    def __post_init__(self):
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError("plateau_factor must be in (0, 1)")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patiences must be at least 1")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}")
        if self.precision not in ("float32", "float64"):
            raise ValueError("precision must be float32 or float64")
        if self.batch_size < 1 or self.max_epochs < 1 or self.learning_rate <= 0:
            raise ValueError("batch_size, max_epochs and learning_rate must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# -- Adam ------------------------------------------------------------------------


@dataclass
class AdamState:
    step: int
    m: dict
    v: dict

    @classmethod
    def zeros(cls, params: dict) -> "AdamState":
        return cls(0, {k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update on name -> array dicts.

    Returns ``(new_params, new_state)``; inputs are not modified.

    Raises
    ------
    FloatingPointError
        If a gradient is not finite; the message names the parameter.
    """
    t = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(t, new_m, new_v)


class Adam:
    """Stateful wrapper applying :func:`adam_step` to a parameter store."""

    def __init__(self, store: nn.ParameterStore, beta1=0.9, beta2=0.999, eps=1e-8):
        self.store = store
        self.params = store.trainable()
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.state = AdamState.zeros({p.name: p.data for p in self.params})

    def step(self, grads: dict, lr: float) -> None:
        current = {p.name: p.data for p in self.params}
        new, self.state = adam_step(current, grads, self.state, lr, self.beta1, self.beta2, self.eps)
        for p in self.params:
            p.data = new[p.name].astype(p.dtype, copy=False)


# -- schedule ----------------------------------------------------------------------


class PlateauSchedule:
    """Reduce the learning rate after ``patience`` epochs without strict
    improvement of the best loss; stop after ``early_stop`` such epochs."""

    def __init__(self, factor: float = 0.75, patience: int = 20, early_stop: int = 50):
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must be in (0, 1)")
        if patience < 1 or early_stop < 1:
            raise ValueError("patiences must be at least 1")
        self.factor = factor
        self.patience = patience
        self.early_stop = early_stop
        self.best = np.inf
        self.since_best = 0
        self.since_reduce = 0

    def update(self, loss: float) -> tuple[float, bool]:
        """Feed one epoch's validation loss; returns ``(lr_multiplier, stop)``."""
        if loss < self.best:
            self.best = loss
            self.since_best = 0
            self.since_reduce = 0
            return 1.0, False
        self.since_best += 1
        self.since_reduce += 1
        multiplier = 1.0
        if self.since_reduce >= self.patience:
            multiplier = self.factor
            self.since_reduce = 0
        return multiplier, self.since_best >= self.early_stop


def plateau_schedule(history, factor=0.75, patience=20, early_stop=50):
    """Replay a loss history.

    Returns ``(multipliers, stop_epoch)``: the per-epoch learning-rate
    multipliers and the 1-based epoch of the stop signal (``None`` if none).
    """
    if len(history) == 0:
        raise ValueError("history must be nonempty")
    sched = PlateauSchedule(factor, patience, early_stop)
    multipliers = []
    stop_epoch = None
    for epoch, loss in enumerate(history, start=1):
        mult, stop = sched.update(float(loss))
        multipliers.append(mult)
        if stop and stop_epoch is None:
            stop_epoch = epoch
    return multipliers, stop_epoch


# -- losses and metrics --------------------------------------------------------------


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels``."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("cross_entropy on an empty batch")
    logp = nn.log_softmax(logits, axis=-1)
    picked = T.getitem(logp, (np.arange(len(labels)), labels))
    return -T.mean(picked)


def mse(pred: Tensor, target, mask=None) -> Tensor:
    """Mean squared error per component; ``mask`` (broadcastable) drops entries."""
    pred = T.as_tensor(pred)
    diff = pred - np.asarray(target, dtype=pred.dtype)
    sq = diff * diff
    if mask is None:
        return T.mean(sq)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), pred.shape)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("mse with an empty mask")
    return T.tensor_sum(sq * mask.astype(pred.dtype)) * (1.0 / count)


def mean_absolute_force_error(pred, target, mask=None) -> float:
    """Mean of ``|pred - target|`` over every force component of every sample."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    err = np.abs(pred - target)
    if mask is None:
        return float(err.mean())
    mask = np.broadcast_to(np.asarray(mask, bool)[..., None], err.shape)
    return float(err[mask].mean())


def accuracy(logits, labels) -> float:
    return float(np.mean(np.argmax(np.asarray(logits), axis=-1) == np.asarray(labels)))


# -- fit loop ------------------------------------------------------------------------


def fit(model, cfg: TrainConfig, n_train: int, batch_loss: Callable, val_loss: Callable,
        on_epoch: Callable | None = None, extra_metrics: Callable | None = None) -> list[dict]:
    """Generic minibatch training loop.

    ``batch_loss(indices, training, rng)`` returns a scalar loss tensor;
    ``val_loss()`` returns a float. The parameters with the best validation
    loss are restored at the end. Returns the per-epoch metric history.
    """
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.store, cfg.beta1, cfg.beta2, cfg.epsilon)
    schedule = PlateauSchedule(cfg.plateau_factor, cfg.plateau_patience, cfg.early_stop_patience)
    params = opt.params
    lr = cfg.learning_rate
    best, best_state = np.inf, None
    history = []
    started = time.perf_counter()
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            with Tape() as tape:
                loss = batch_loss(idx, True, rng)
            grads = tape.gradient(loss, params)
            opt.step({p.name: g.data for p, g in zip(params, grads) if g is not None}, lr)
            total += loss.item() * len(idx)
        val = float(val_loss())
        record = {"epoch": epoch, "train_loss": total / n_train, "val_loss": val, "lr": lr}
        if extra_metrics is not None:
            record.update(extra_metrics())
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        log.info("epoch %d train %.6g val %.6g lr %.3g", epoch, record["train_loss"], val, lr)
        if val < best:
            best, best_state = val, model.store.state_dict()
        multiplier, stop = schedule.update(val)
        lr *= multiplier
        if stop:
            break
        if cfg.max_seconds is not None and time.perf_counter() - started > cfg.max_seconds:
            log.warning("stopping after %.0f s time budget", cfg.max_seconds)
            break
    if best_state is not None:
        model.store.load_state_dict(best_state)
    return history


def _batched(n: int, size: int):
    for start in range(0, n, size):
        yield np.arange(start, min(n, start + size))


# -- crystal classification ---------------------------------------------------------------


def _env_inputs(model: CrystalClassifier, envs: EnvironmentSet):
    values = bond_type_values(envs.center_types, envs.neighbor_types, model.spec.num_types)
    return envs.bonds.astype(model.dtype), values.astype(model.dtype)


def evaluate_classifier(model: CrystalClassifier, envs: EnvironmentSet, batch_size: int = 256) -> dict:
    bonds, values = _env_inputs(model, envs)
    logits = np.concatenate([model(bonds[i], values[i]).data for i in _batched(len(envs), batch_size)])
    loss = cross_entropy(Tensor(logits), envs.labels).item()
    return {"accuracy": accuracy(logits, envs.labels), "loss": loss, "n": len(envs)}


def train_classifier(model: CrystalClassifier, train: EnvironmentSet, val: EnvironmentSet,
                     cfg: TrainConfig, on_epoch=None) -> list[dict]:
    bonds, values = _env_inputs(model, train)

    def batch_loss(idx, training, rng):
        logits = model(bonds[idx], values[idx], training=training, rng=rng)
        return cross_entropy(logits, train.labels[idx])

    val_metrics = {}

    def val_loss():
        val_metrics.update(evaluate_classifier(model, val))
        return val_metrics["loss"]

    return fit(model, cfg, len(train), batch_loss, val_loss, on_epoch,
               lambda: {"val_accuracy": val_metrics["accuracy"]})


# -- forces ---------------------------------------------------------------------------------


def evaluate_force(model: ForceRegressor, data: ForceData, batch_size: int = 64) -> dict:
    preds = np.concatenate([
        model(data.coords[i].astype(model.dtype), data.types[i]).data for i in _batched(len(data), batch_size)
    ])
    return {
        "force_mae": mean_absolute_force_error(preds, data.forces),
        "force_mse": float(np.mean((preds - data.forces) ** 2)),
        "n": len(data),
    }


def train_force(model: ForceRegressor, train: ForceData, val: ForceData, cfg: TrainConfig,
                on_epoch=None) -> list[dict]:
    coords = train.coords.astype(model.dtype)

    def batch_loss(idx, training, rng):
        _, forces = model.energy_and_forces(coords[idx], train.types[idx], training=training, rng=rng)
        return mse(forces, train.forces[idx])

    val_metrics = {}

    def val_loss():
        val_metrics.update(evaluate_force(model, val))
        return val_metrics["force_mse"]

    return fit(model, cfg, len(train), batch_loss, val_loss, on_epoch,
               lambda: {"val_force_mae": val_metrics["force_mae"]})


# -- backmapping -------------------------------------------------------------------------------


def evaluate_backmap(model: Backmapper, data: BackmapData, batch_size: int = 128) -> dict:
    preds = np.concatenate([
        model(data.coords[i].astype(model.dtype), data.bead_types[i], data.atom_labels[i]).data
        for i in _batched(len(data), batch_size)
    ])
    err = preds - data.targets
    return {"coord_mse": float(np.mean(err**2)), "coord_mae": float(np.mean(np.abs(err))), "n": len(data)}


def train_backmap(model: Backmapper, train: BackmapData, val: BackmapData, cfg: TrainConfig,
                  on_epoch=None) -> list[dict]:
    coords = train.coords.astype(model.dtype)

    def batch_loss(idx, training, rng):
        pred = model(coords[idx], train.bead_types[idx], train.atom_labels[idx], training=training, rng=rng)
        return mse(pred, train.targets[idx])

    def val_loss():
        return evaluate_backmap(model, val)["coord_mse"]

    return fit(model, cfg, len(train), batch_loss, val_loss, on_epoch)
