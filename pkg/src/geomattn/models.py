"""Reference architectures: crystal classifier, force field, backmapper."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import nn
from . import tensor as T
from .attention import AttentionConfig, LabeledVectorAttention, Vector2VectorAttention, VectorAttention
from .tensor import Tape, Tensor

__all__ = [
    "PointCloud",
    "ModelSpec",
    "pairwise_difference",
    "pairwise_difference_sum",
    "symmetrized_type_values",
    "bond_type_values",
    "one_hot",
    "CrystalClassifier",
    "ForceRegressor",
    "Backmapper",
    "build_crystal_classifier",
    "build_force_regressor",
    "build_backmapper",
    "build_model",
    "save_model",
    "load_model",
]

TASKS = ("classify", "force", "backmap")


@dataclass
class PointCloud:
    """Coordinates with per-point values, integer types and a validity mask."""

    coords: np.ndarray
    values: np.ndarray | None = None
    types: np.ndarray | None = None
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        n = self.coords.shape[0]
        if self.coords.shape != (n, 3):
            raise ValueError(f"coords must be (N, 3), got {self.coords.shape}")
        if self.types is None:
            self.types = np.zeros(n, dtype=np.int64)
        self.types = np.asarray(self.types, dtype=np.int64)
        if self.values is None:
            self.values = np.zeros((n, 0))
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.ones(n, bool) if self.mask is None else np.asarray(self.mask, bool)
        if self.types.shape != (n,) or self.mask.shape != (n,) or self.values.shape[0] != n:
            raise ValueError("point cloud fields are not aligned")
        if not self.mask.any():
            raise ValueError("point cloud needs at least one unmasked point")

    def __len__(self):
        return self.coords.shape[0]


def one_hot(types, num_types: int) -> np.ndarray:
    types = np.asarray(types, dtype=np.int64)
    if types.size and (types.min() < 0 or types.max() >= num_types):
        raise ValueError(f"type index out of range for {num_types} types")
    return np.eye(num_types)[types]


def pairwise_difference(coords):
    """``out[..., i, j, :] = r_j - r_i`` for ``(..., N, 3)`` coordinates.

    Tensors stay differentiable; arrays give arrays.
    """
    if isinstance(coords, Tensor):
        return T.expand_dims(coords, -3) - T.expand_dims(coords, -2)
    coords = np.asarray(coords, dtype=np.float64)
    return coords[..., None, :, :] - coords[..., :, None, :]


def pairwise_difference_sum(values):
    """``out[..., i, j, :] = [v_i - v_j, v_i + v_j]``."""
    if isinstance(values, Tensor):
        vi = T.expand_dims(values, -2)
        vj = T.expand_dims(values, -3)
        d = vi - vj
        s = vi + vj
        return T.concatenate([d, s], axis=-1)
    values = np.asarray(values, dtype=np.float64)
    vi = values[..., :, None, :]
    vj = values[..., None, :, :]
    return np.concatenate(np.broadcast_arrays(vi - vj, vi + vj), axis=-1)


def symmetrized_type_values(types, num_types: int) -> np.ndarray:
    """One-hot ``[t_i - t_j, t_i + t_j]`` for every ordered pair: ``(..., N, N, 2T)``."""
    return pairwise_difference_sum(one_hot(types, num_types))


def bond_type_values(center_types, neighbor_types, num_types: int) -> np.ndarray:
    """Per-bond ``[t_center - t_nbr, t_center + t_nbr]`` for neighbor environments.

    ``center_types`` has shape ``(...,)`` and ``neighbor_types`` ``(..., k)``.
    """
    tc = one_hot(center_types, num_types)[..., None, :]
    tn = one_hot(neighbor_types, num_types)
    return np.concatenate(np.broadcast_arrays(tc - tn, tc + tn), axis=-1)


@dataclass
class ModelSpec:
    """Architecture hyperparameters. ``ModelSpec.defaults(task)`` gives the
    standard block structure (2 / 6 / 2+1+2 blocks, width 32)."""

    task: str
    n_blocks: int = 2
    working_dim: int = 32
    hidden_dim: int = 64
    activation: str = "relu"
    merge_kind: str = "mean"
    join_kind: str = "mean"
    dropout: float = 0.0
    rank: int = 2
    num_types: int = 2
    num_classes: int = 0
    num_atom_labels: int = 0
    refine_blocks: int = 2
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.n_blocks < 0 or self.refine_blocks < 0:
            raise ValueError("block counts must be nonnegative")
        if self.num_types < 1:
            raise ValueError("num_types must be positive")
        if self.task == "classify" and self.num_classes < 2:
            raise ValueError("a classifier needs num_classes >= 2")
        if self.task == "backmap" and self.num_atom_labels < 1:
            raise ValueError("a backmapper needs num_atom_labels >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")
        # validates the shared layer settings early
        self.attention_config()

    @classmethod
    def defaults(cls, task: str, **overrides) -> "ModelSpec":
        base = {
            "classify": dict(n_blocks=2, activation="relu", merge_kind="mean", join_kind="mean", dropout=0.5),
            "force": dict(n_blocks=6, activation="swish", merge_kind="linear_projection",
                          join_kind="linear_projection", dropout=0.0),
            "backmap": dict(n_blocks=2, activation="relu", merge_kind="linear_projection",
                            join_kind="linear_projection", dropout=0.0, refine_blocks=2),
        }[task]
        base.update(overrides)
        return cls(task=task, **base)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model spec fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def attention_config(self, reduce_mode: str = "covariant") -> AttentionConfig:
        return AttentionConfig(
            rank=self.rank,
            reduce_mode=reduce_mode,
            merge_kind=self.merge_kind,
            join_kind=self.join_kind,
            working_dim=self.working_dim,
            hidden_dim=self.hidden_dim,
            score_activation=self.activation,
            dropout=self.dropout,
        )


class _Block:
    """Attention, two dense layers and a residual add."""

    def __init__(self, store, name, spec: ModelSpec):
        dim = spec.working_dim
        self.attention = VectorAttention(store, f"{name}/attention", spec.attention_config())
        self.expand = nn.Dense(store, f"{name}/dense0", dim, 2 * dim, spec.activation)
        self.project = nn.Dense(store, f"{name}/dense1", 2 * dim, dim)

    def __call__(self, coords, values, mask, training, rng):
        out = self.attention(coords, values, mask, training=training, rng=rng)
        return self.project(self.expand(out)) + values


class _Model:
    spec: ModelSpec
    store: nn.ParameterStore

    def _setup(self, spec: ModelSpec):
        self.spec = spec
        self.dtype = np.dtype(spec.dtype)
        self.store = nn.ParameterStore(seed=spec.seed, dtype=self.dtype)

    def _cast(self, x):
        if isinstance(x, Tensor):
            return x
        return Tensor(np.asarray(x, dtype=self.dtype))

    def parameter_count(self) -> int:
        return self.store.count()


class CrystalClassifier(_Model):
    """Rotation-invariant classifier of neighbor environments.

    Inputs are bond vectors ``(B, k, 3)`` from a central particle to its
    neighbors and per-bond symmetrized type values ``(B, k, 2 * num_types)``.
    Returns class logits ``(B, num_classes)``.
    """

    def __init__(self, spec: ModelSpec):
        if spec.task != "classify":
            raise ValueError("CrystalClassifier needs a 'classify' spec")
        self._setup(spec)
        s, dim = self.store, spec.working_dim
        self.input_proj = nn.Dense(s, "input", 2 * spec.num_types, dim)
        self.blocks = [_Block(s, f"block{i}", spec) for i in range(spec.n_blocks)]
        self.reduce = VectorAttention(s, "reduce", spec.attention_config("invariant"))
        self.head = nn.Sequential([
            nn.Dense(s, "head/dense0", dim, 2 * dim, spec.activation),
            nn.Dense(s, "head/logits", 2 * dim, spec.num_classes),
        ])

    def __call__(self, bonds, bond_values, mask=None, training=False, rng=None, return_attention=False):
        r = self._cast(bonds)
        v = self.input_proj(self._cast(bond_values))
        for block in self.blocks:
            v = block(r, v, mask, training, rng)
        v, w = self.reduce(r, v, mask, training=training, rng=rng, return_attention=True)
        logits = self.head(v, training=training, rng=rng)
        return (logits, w) if return_attention else logits

    def predict_proba(self, bonds, bond_values, mask=None) -> np.ndarray:
        logits = self(bonds, bond_values, mask).data
        z = np.exp(logits - logits.max(axis=-1, keepdims=True))
        return z / z.sum(axis=-1, keepdims=True)


class ForceRegressor(_Model):
    """Conservative force field: forces are the negative coordinate gradient
    of a summed per-atom energy computed from atom-centered differences."""

    def __init__(self, spec: ModelSpec):
        if spec.task != "force":
            raise ValueError("ForceRegressor needs a 'force' spec")
        self._setup(spec)
        s, dim = self.store, spec.working_dim
        self.input_proj = nn.Dense(s, "input", 2 * spec.num_types, dim)
        self.blocks = [_Block(s, f"block{i}", spec) for i in range(spec.n_blocks)]
        self.reduce = VectorAttention(s, "reduce", spec.attention_config("invariant"))
        self.head = nn.Sequential([
            nn.Dense(s, "head/dense0", dim, 2 * dim, spec.activation),
            nn.Dense(s, "head/energy", 2 * dim, 1, use_bias=False),
        ])

    def _pair_mask(self, mask, n):
        if mask is None:
            return None
        mask = np.asarray(mask, bool)
        return np.broadcast_to(mask[..., None, :], mask.shape + (n,)).copy()

    def atom_energies(self, coords, types, mask=None, training=False, rng=None, return_attention=False):
        coords = self._cast(coords)
        n = coords.shape[-2]
        r_ij = pairwise_difference(coords)
        v = self.input_proj(self._cast(symmetrized_type_values(types, self.spec.num_types)))
        pair_mask = self._pair_mask(mask, n)
        for block in self.blocks:
            v = block(r_ij, v, pair_mask, training, rng)
        v, w = self.reduce(r_ij, v, pair_mask, training=training, rng=rng, return_attention=True)
        e = self.head(v, training=training, rng=rng)
        e = T.reshape(e, e.shape[:-1])
        if mask is not None:
            e = e * np.asarray(mask, dtype=self.dtype)
        return (e, w) if return_attention else e

    def energy(self, coords, types, mask=None, training=False, rng=None) -> Tensor:
        """Molecule energy, shape ``coords.shape[:-2]``."""
        return T.tensor_sum(self.atom_energies(coords, types, mask, training, rng), -1)

    def energy_and_forces(self, coords, types, mask=None, training=False, rng=None):
        """Return ``(energy, forces)``; forces are ``-dE/dr`` and stay
        differentiable with respect to the parameters when an outer tape is
        recording."""
        coords = self._cast(np.asarray(coords.data if isinstance(coords, Tensor) else coords))
        with Tape() as tape:
            tape.watch(coords)
            energy = self.energy(coords, types, mask, training, rng)
            total = T.tensor_sum(energy)
        (grad,) = tape.gradient(total, [coords])
        if grad is None:
            grad = Tensor(np.zeros(coords.shape, dtype=self.dtype))
        return energy, -grad

    def __call__(self, coords, types, mask=None, training=False, rng=None):
        return self.energy_and_forces(coords, types, mask, training, rng)[1]


class Backmapper(_Model):
    """Rotation-covariant map from coarse beads to atom coordinates."""

    def __init__(self, spec: ModelSpec):
        if spec.task != "backmap":
            raise ValueError("Backmapper needs a 'backmap' spec")
        self._setup(spec)
        s, dim = self.store, spec.working_dim
        self.input_proj = nn.Dense(s, "input", spec.num_types, dim)
        self.blocks = [_Block(s, f"block{i}", spec) for i in range(spec.n_blocks)]
        self.labels = s.add("labels/embedding", (spec.num_atom_labels, dim), "normal")
        self.translate_layer = LabeledVectorAttention(s, "translate", spec.attention_config("invariant"))
        self.label_pairs = nn.Dense(s, "refine/pair_values", 2 * dim, dim)
        self.refine = [
            Vector2VectorAttention(s, f"refine{i}", spec.attention_config("invariant"))
            for i in range(spec.refine_blocks)
        ]

    def translate(self, coords, bead_types, atom_labels, mask=None, label_mask=None,
                  training=False, rng=None, return_attention=False):
        """Atom vectors straight out of the labeled translation layer."""
        r = self._cast(coords)
        v = self.input_proj(self._cast(_one_hot_cast(bead_types, self.spec.num_types, self.dtype)))
        for block in self.blocks:
            v = block(r, v, mask, training, rng)
        labels = nn.embedding(atom_labels, self.labels)
        out = self.translate_layer(labels, r, v, mask, label_mask, training=training, rng=rng,
                                   return_attention=return_attention)
        return out if return_attention else (out, None)

    def __call__(self, coords, bead_types, atom_labels, mask=None, label_mask=None,
                 training=False, rng=None, return_attention=False):
        vecs, w = self.translate(coords, bead_types, atom_labels, mask, label_mask,
                                 training, rng, return_attention)
        labels = nn.embedding(atom_labels, self.labels)
        pair_values = self.label_pairs(pairwise_difference_sum(labels))
        pair_mask = None
        if label_mask is not None:
            lm = np.asarray(label_mask, bool)
            pair_mask = np.broadcast_to(lm[..., None, :], lm.shape + (lm.shape[-1],)).copy()
        for layer in self.refine:
            step = layer(pairwise_difference(vecs), pair_values, pair_mask, training=training, rng=rng)
            vecs = vecs + step
        if label_mask is not None:
            vecs = vecs * np.asarray(label_mask, dtype=self.dtype)[..., None]
        return (vecs, w) if return_attention else vecs


def _one_hot_cast(types, n, dtype):
    return one_hot(types, n).astype(dtype)


def build_crystal_classifier(spec: ModelSpec) -> CrystalClassifier:
    return CrystalClassifier(spec)


def build_force_regressor(spec: ModelSpec) -> ForceRegressor:
    return ForceRegressor(spec)


def build_backmapper(spec: ModelSpec) -> Backmapper:
    return Backmapper(spec)


def build_model(spec: ModelSpec):
    return {"classify": CrystalClassifier, "force": ForceRegressor, "backmap": Backmapper}[spec.task](spec)


def save_model(model, directory, extra: dict | None = None) -> None:
    """Write ``spec.json`` and ``params.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {"model": model.spec.to_dict()}
    if extra:
        meta.update(extra)
    (directory / "spec.json").write_text(json.dumps(meta, indent=2))
    nn.save_checkpoint(model.store, directory / "params.json")


def load_model(directory):
    """Rebuild a model saved with :func:`save_model`; returns ``(model, metadata)``."""
    directory = Path(directory)
    meta = json.loads((directory / "spec.json").read_text())
    model = build_model(ModelSpec.from_dict(meta["model"]))
    nn.load_checkpoint(directory / "params.json", model.store)
    return model, meta
