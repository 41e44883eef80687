"""Geometric-algebra attention layers.

Every layer works on clouds laid out as ``coords (..., N, 3)`` and
``values (..., N, d)`` with an optional boolean ``mask (..., N)``. Leading
axes are independent clouds. Tuples of ``rank`` points become ``rank``
trailing tuple axes, so for pairs the tuple tensors have shape
``(..., N, N, .)`` and tuple ``(i, j)`` sits at index ``[..., i, j, :]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import algebra
from . import nn
from . import tensor as T
from .tensor import Tensor

__all__ = [
    "AttentionConfig",
    "TupleTable",
    "enumerate_tuples",
    "tensor_geometric_product",
    "tensor_product_chain",
    "tensor_invariants",
    "tensor_covariant_vector",
    "tuple_products",
    "TupleRepresentation",
    "VectorAttention",
    "Vector2VectorAttention",
    "LabeledVectorAttention",
]

_STRUCTURE = algebra.structure_constants()
_EMBED = np.zeros((3, 8))
_EMBED[[0, 1, 2], [1, 2, 3]] = 1.0

MERGE_KINDS = ("mean", "linear_projection")
REDUCE_MODES = ("covariant", "invariant")


@dataclass(frozen=True)
class AttentionConfig:
    """Hyperparameters of one attention layer.

    ``reduce_mode="covariant"`` normalizes attention per leading tuple index
    and yields one output per point; ``"invariant"`` normalizes over every
    tuple of the cloud and yields a single output.
    """

    rank: int = 2
    reduce_mode: str = "covariant"
    merge_kind: str = "mean"
    join_kind: str = "mean"
    working_dim: int = 32
    hidden_dim: int = 64
    score_activation: str = "relu"
    dropout: float = 0.0

    def __post_init__(self):
        if self.rank not in (2, 3):
            raise ValueError(f"rank must be 2 or 3, got {self.rank}")
        if self.reduce_mode not in REDUCE_MODES:
            raise ValueError(f"reduce_mode must be one of {REDUCE_MODES}")
        if self.merge_kind not in MERGE_KINDS or self.join_kind not in MERGE_KINDS:
            raise ValueError(f"merge/join kinds must be one of {MERGE_KINDS}")
        if self.working_dim <= 0 or self.hidden_dim <= 0:
            raise ValueError("working_dim and hidden_dim must be positive")
        if self.score_activation not in nn.ACTIVATIONS:
            raise ValueError(f"unknown activation {self.score_activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def replace(self, **changes) -> "AttentionConfig":
        fields = dict(self.__dict__)
        fields.update(changes)
        return AttentionConfig(**fields)


@dataclass(frozen=True)
class TupleTable:
    indices: np.ndarray  # (n_tuples, rank), lexicographic
    mask: np.ndarray  # (n_tuples,)


def enumerate_tuples(n_points: int, rank: int, point_mask=None) -> TupleTable:
    """All ``n_points ** rank`` index tuples in lexicographic order.

    Self-tuples such as ``(i, i)`` are included; tuples touching a masked
    point are masked. The order equals the C-order flattening of the tuple
    axes used by the layers.
    """
    if rank not in (2, 3):
        raise ValueError(f"unsupported tuple rank {rank}")
    if n_points < 1:
        raise ValueError("need at least one point")
    point_mask = np.ones(n_points, bool) if point_mask is None else np.asarray(point_mask, bool)
    if point_mask.shape != (n_points,):
        raise ValueError("point_mask must have one entry per point")
    idx = np.array(list(itertools.product(range(n_points), repeat=rank)), dtype=np.int64)
    return TupleTable(idx, np.all(point_mask[idx], axis=1))


# -- differentiable geometric algebra ------------------------------------------


def tensor_geometric_product(a: Tensor, b: Tensor) -> Tensor:
    return T.bilinear(a, b, _STRUCTURE)


def _to_multivector(vectors: Tensor) -> Tensor:
    return T.matmul(vectors, _EMBED.astype(vectors.dtype))


def tensor_product_chain(vectors) -> Tensor:
    """Differentiable left-folded product of a sequence of ``(..., 3)`` tensors."""
    if len(vectors) == 0:
        raise ValueError("product chain needs at least one vector")
    out = _to_multivector(T.as_tensor(vectors[0]))
    for v in vectors[1:]:
        out = tensor_geometric_product(out, _to_multivector(T.as_tensor(v)))
    return out


def tensor_invariants(m: Tensor) -> Tensor:
    """``(scalar, |vector|, |bivector|, trivector)`` of ``(..., 8)`` multivectors."""
    return T.concatenate(
        [
            m[..., 0:1],
            T.expand_dims(T.safe_norm(m[..., 1:4]), -1),
            T.expand_dims(T.safe_norm(m[..., 4:7]), -1),
            m[..., 7:8],
        ],
        axis=-1,
    )


def tensor_covariant_vector(m: Tensor, parity: str) -> Tensor:
    if parity == "odd":
        return m[..., 1:4]
    if parity == "even":
        return T.matmul(m[..., 4:7], algebra.DUAL_MATRIX.astype(m.dtype))
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def _at_tuple_axis(x: Tensor, position: int, rank: int) -> Tensor:
    """Reshape ``(..., N, F)`` so the point axis becomes tuple axis ``position``."""
    lead, (n, f) = x.shape[:-2], x.shape[-2:]
    shape = lead + (1,) * position + (n,) + (1,) * (rank - 1 - position) + (f,)
    return T.reshape(x, shape)


def _mask_at_tuple_axis(mask: np.ndarray, position: int, rank: int) -> np.ndarray:
    lead, n = mask.shape[:-1], mask.shape[-1]
    return mask.reshape(lead + (1,) * position + (n,) + (1,) * (rank - 1 - position))


def tuple_products(coords: Tensor, rank: int) -> Tensor:
    """Geometric products of every ordered tuple: ``(..., N, ..., N, 8)``."""
    mv = _to_multivector(T.as_tensor(coords))
    p = _at_tuple_axis(mv, 0, rank)
    for pos in range(1, rank):
        p = tensor_geometric_product(p, _at_tuple_axis(mv, pos, rank))
    return p


def _parity(rank: int) -> str:
    return "odd" if rank % 2 else "even"


def _tuple_mask(mask, rank: int, positions) -> np.ndarray | None:
    if mask is None:
        return None
    out = None
    for pos in positions:
        m = _mask_at_tuple_axis(mask, pos, rank)
        out = m if out is None else (out & m)
    return out


def _score_mlp(store, name, cfg: AttentionConfig, dim: int):
    layers = [nn.Dense(store, f"{name}/dense0", dim, cfg.hidden_dim, cfg.score_activation)]
    if cfg.dropout:
        layers.append(nn.Dropout(cfg.dropout))
    layers.append(nn.Dense(store, f"{name}/dense1", cfg.hidden_dim, 1))
    return nn.Sequential(layers)


class TupleRepresentation:
    """Per-tuple values ``J(V(q), M(v_i, v_j, ...))`` for a point cloud.

    ``V`` is a one-hidden-layer MLP with layer normalization on its hidden
    layer; ``M`` and ``J`` are either means or sums of per-argument linear
    projections. ``extra_join_args`` reserves projections for additional
    join arguments (the atom label of the translation layer).
    """

    def __init__(self, store: nn.ParameterStore, name: str, cfg: AttentionConfig,
                 value_dim: int | None = None, extra_join_args: int = 0):
        self.cfg = cfg
        dim = cfg.working_dim
        value_dim = dim if value_dim is None else value_dim
        if cfg.merge_kind == "mean" and cfg.join_kind == "mean" and value_dim != dim:
            raise ValueError("mean merge/join needs value_dim == working_dim")
        vlayers = [
            nn.Dense(store, f"{name}/value/dense0", 4, cfg.hidden_dim),
            nn.LayerNorm(store, f"{name}/value/norm", cfg.hidden_dim),
            nn.Activation("relu"),
        ]
        if cfg.dropout:
            vlayers.append(nn.Dropout(cfg.dropout))
        vlayers.append(nn.Dense(store, f"{name}/value/dense1", cfg.hidden_dim, dim))
        self.value_fn = nn.Sequential(vlayers)
        self.merge_weights = None
        if cfg.merge_kind == "linear_projection":
            self.merge_weights = [
                store.add(f"{name}/merge/W{t}", (value_dim, dim)) for t in range(cfg.rank)
            ]
        self.join_weights = None
        if cfg.join_kind == "linear_projection":
            self.join_weights = [
                store.add(f"{name}/join/W{t}", (dim, dim)) for t in range(2 + extra_join_args)
            ]

    def geometry(self, coords: Tensor, training=False, rng=None) -> tuple[Tensor, Tensor]:
        """Tuple products ``p`` and ``V(invariants(p))``."""
        p = tuple_products(coords, self.cfg.rank)
        q = tensor_invariants(p)
        return p, self.value_fn(q, training=training, rng=rng)

    def merge(self, values: Tensor) -> Tensor:
        rank = self.cfg.rank
        out = None
        for t in range(rank):
            term = values if self.merge_weights is None else T.matmul(values, self.merge_weights[t])
            term = _at_tuple_axis(term, t, rank)
            out = term if out is None else out + term
        if self.merge_weights is None:
            out = out * (1.0 / rank)
        return out

    def join(self, *args: Tensor) -> Tensor:
        if self.join_weights is None:
            out = args[0]
            for a in args[1:]:
                out = out + a
            return out * (1.0 / len(args))
        out = None
        for a, W in zip(args, self.join_weights):
            term = T.matmul(a, W)
            out = term if out is None else out + term
        return out

    def __call__(self, coords, values, training=False, rng=None) -> tuple[Tensor, Tensor]:
        p, vq = self.geometry(coords, training, rng)
        return p, self.join(vq, self.merge(T.as_tensor(values)))


class _AttentionBase:
    def __init__(self, store, name, cfg: AttentionConfig, value_dim=None, extra_join_args=0):
        self.cfg = cfg
        self.name = name
        self.tuples = TupleRepresentation(store, name, cfg, value_dim, extra_join_args)
        self.score_fn = _score_mlp(store, f"{name}/score", cfg, cfg.working_dim)

    def _weights(self, v_tuple: Tensor, mask, training, rng) -> Tensor:
        rank = self.cfg.rank
        logits = self.score_fn(v_tuple, training=training, rng=rng)
        logits = T.reshape(logits, logits.shape[:-1])
        if self.cfg.reduce_mode == "covariant":
            group_mask = _tuple_mask(mask, rank, range(1, rank))
            axes = tuple(range(-rank + 1, 0))
        else:
            group_mask = _tuple_mask(mask, rank, range(rank))
            axes = tuple(range(-rank, 0))
        return nn.masked_softmax(logits, group_mask, axes)

    def _reduce_axes(self):
        rank = self.cfg.rank
        start = 1 if self.cfg.reduce_mode == "covariant" else 0
        # feature axis is last, so tuple axes sit at -rank-1 .. -2
        return tuple(range(-rank - 1 + start, -1))

    def _finish(self, out: Tensor, mask):
        if mask is not None and self.cfg.reduce_mode == "covariant":
            out = out * np.asarray(mask, dtype=out.dtype)[..., None]
        return out


def _check_cloud(coords, values, mask):
    coords = T.as_tensor(coords)
    values = T.as_tensor(values, coords)
    if coords.shape[-1] != 3:
        raise ValueError(f"coordinates need a trailing axis of 3, got {coords.shape}")
    if coords.shape[:-1] != values.shape[:-1]:
        raise ValueError(f"coords {coords.shape} and values {values.shape} are not aligned")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != coords.shape[:-1]:
            raise ValueError(f"mask shape {mask.shape} does not match cloud {coords.shape[:-1]}")
        if not np.all(np.any(mask, axis=-1)):
            raise ValueError("point cloud is fully masked")
    return coords, values, mask


class VectorAttention(_AttentionBase):
    """Rotation-invariant attention producing new values.

    Covariant mode returns ``(..., N, working_dim)``; invariant mode returns
    ``(..., working_dim)``. With ``return_attention=True`` the attention
    weights (tuple axes trailing) are returned as well.
    """

    def __init__(self, store, name, cfg: AttentionConfig, value_dim=None):
        super().__init__(store, name, cfg, value_dim)

    def __call__(self, coords, values, mask=None, training=False, rng=None, return_attention=False):
        coords, values, mask = _check_cloud(coords, values, mask)
        _, v_tuple = self.tuples(coords, values, training, rng)
        w = self._weights(v_tuple, mask, training, rng)
        out = T.tensor_sum(T.expand_dims(w, -1) * v_tuple, self._reduce_axes())
        out = self._finish(out, mask)
        return (out, w) if return_attention else out


class Vector2VectorAttention(_AttentionBase):
    """Rotation-covariant attention producing new vectors.

    Each tuple proposes ``alpha_0 vector(p) + alpha_1 r_i + alpha_2 r_j + ...``
    scaled by a learned scalar ``R(v_tuple)``; attention weights reduce the
    proposals.
    """

    def __init__(self, store, name, cfg: AttentionConfig, value_dim=None):
        super().__init__(store, name, cfg, value_dim)
        self.scale_fn = nn.Sequential([
            nn.Dense(store, f"{name}/scale/dense0", cfg.working_dim, cfg.hidden_dim, cfg.score_activation),
            nn.Dense(store, f"{name}/scale/dense1", cfg.hidden_dim, 1, kernel_init="zeros", bias_init="ones"),
        ])
        self.alpha = store.add(f"{name}/alpha", (cfg.rank + 1,), "ones")

    def candidates(self, p: Tensor, coords: Tensor) -> Tensor:
        rank = self.cfg.rank
        out = tensor_covariant_vector(p, _parity(rank)) * self.alpha[0]
        for t in range(rank):
            out = out + _at_tuple_axis(coords, t, rank) * self.alpha[t + 1]
        return out

    def __call__(self, coords, values, mask=None, training=False, rng=None, return_attention=False):
        coords, values, mask = _check_cloud(coords, values, mask)
        p, v_tuple = self.tuples(coords, values, training, rng)
        w = self._weights(v_tuple, mask, training, rng)
        vecs = self.scale_fn(v_tuple, training=training, rng=rng) * self.candidates(p, coords)
        out = T.tensor_sum(T.expand_dims(w, -1) * vecs, self._reduce_axes())
        out = self._finish(out, mask)
        return (out, w) if return_attention else out


class LabeledVectorAttention(_AttentionBase):
    """Translate a reference cloud into one vector per label.

    For each label value ``v_a`` the tuple values over the reference cloud
    are ``J(v_a, V(q), M(v_i, v_j, ...))``; the reduction over tuples is
    always the invariant kind (one softmax per label).
    """

    def __init__(self, store, name, cfg: AttentionConfig, value_dim=None):
        cfg = cfg.replace(reduce_mode="invariant")
        super().__init__(store, name, cfg, value_dim, extra_join_args=1)
        self.scale_fn = nn.Sequential([
            nn.Dense(store, f"{name}/scale/dense0", cfg.working_dim, cfg.hidden_dim, cfg.score_activation),
            nn.Dense(store, f"{name}/scale/dense1", cfg.hidden_dim, 1, kernel_init="zeros", bias_init="ones"),
        ])
        self.alpha = store.add(f"{name}/alpha", (cfg.rank + 1,), "ones")

    candidates = Vector2VectorAttention.candidates

    def __call__(self, labels, coords, values, mask=None, label_mask=None,
                 training=False, rng=None, return_attention=False):
        coords, values, mask = _check_cloud(coords, values, mask)
        labels = T.as_tensor(labels, coords)
        if labels.shape[-1] != self.cfg.working_dim:
            raise ValueError("label width must equal the working dimension")
        rank = self.cfg.rank
        p, vq = self.tuples.geometry(coords, training, rng)
        merged = self.tuples.merge(values)
        label_axis = -rank - 2
        lab = T.reshape(labels, labels.shape[:-1] + (1,) * rank + labels.shape[-1:])
        v_tuple = self.tuples.join(lab, T.expand_dims(vq, label_axis), T.expand_dims(merged, label_axis))
        logits = self.score_fn(v_tuple, training=training, rng=rng)
        logits = T.reshape(logits, logits.shape[:-1])
        group_mask = _tuple_mask(mask, rank, range(rank))
        if group_mask is not None:
            group_mask = np.expand_dims(group_mask, label_axis + 1)
        w = nn.masked_softmax(logits, group_mask, tuple(range(-rank, 0)))
        cand = T.expand_dims(self.candidates(p, coords), label_axis)
        vecs = self.scale_fn(v_tuple, training=training, rng=rng) * cand
        out = T.tensor_sum(T.expand_dims(w, -1) * vecs, tuple(range(-rank - 1, -1)))
        if label_mask is not None:
            out = out * np.asarray(label_mask, dtype=out.dtype)[..., None]
        return (out, w) if return_attention else out
