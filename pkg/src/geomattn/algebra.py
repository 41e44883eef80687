"""Exact geometric algebra of three-dimensional Euclidean space.

Multivectors are stored as arrays whose trailing axis holds the 8 blade
coefficients in the fixed order::

    index   0    1    2    3    4     5     6     7
    blade   1    e1   e2   e3   e12   e13   e23   e123

All kernels broadcast over leading axes, so a ``(..., 8)`` array is a batch of
multivectors. The :class:`Multivector` dataclass is a thin value wrapper for
single elements.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "BLADES",
    "Multivector",
    "InvariantVec",
    "Rotation",
    "geometric_product",
    "product_chain",
    "invariants",
    "covariant_vector",
    "rotate",
    "vector_to_multivector",
    "reverse",
    "structure_constants",
    "DUAL_MATRIX",
]

BLADES = ("1", "e1", "e2", "e3", "e12", "e13", "e23", "e123")

SCALAR = slice(0, 1)
VECTOR = slice(1, 4)
BIVECTOR = slice(4, 7)
TRIVECTOR = slice(7, 8)

# Right product with e123 maps bivector coefficients (e12, e13, e23) onto
# vector coefficients: e12 e123 = -e3, e13 e123 = e2, e23 e123 = -e1.
DUAL_MATRIX = np.array(
    [
        [0.0, 0.0, -1.0],
        [0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0],
    ]
)


def _as_array(m) -> np.ndarray:
    if isinstance(m, Multivector):
        return m.components
    return np.asarray(m, dtype=np.float64)


def _gp(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a0, a1, a2, a3, a12, a13, a23, a123 = np.moveaxis(a, -1, 0)
    b0, b1, b2, b3, b12, b13, b23, b123 = np.moveaxis(b, -1, 0)
    out = np.stack(
        [
            a0 * b0 + a1 * b1 + a2 * b2 + a3 * b3
            - a12 * b12 - a13 * b13 - a23 * b23 - a123 * b123,
            a0 * b1 + a1 * b0 - a2 * b12 - a3 * b13
            + a12 * b2 + a13 * b3 - a23 * b123 - a123 * b23,
            a0 * b2 + a1 * b12 + a2 * b0 - a3 * b23
            - a12 * b1 + a13 * b123 + a23 * b3 + a123 * b13,
            a0 * b3 + a1 * b13 + a2 * b23 + a3 * b0
            - a12 * b123 - a13 * b1 - a23 * b2 - a123 * b12,
            a0 * b12 + a1 * b2 - a2 * b1 + a3 * b123
            + a12 * b0 - a13 * b23 + a23 * b13 + a123 * b3,
            a0 * b13 + a1 * b3 - a2 * b123 - a3 * b1
            + a12 * b23 + a13 * b0 - a23 * b12 - a123 * b2,
            a0 * b23 + a1 * b123 + a2 * b3 - a3 * b2
            - a12 * b13 + a13 * b12 + a23 * b0 + a123 * b1,
            a0 * b123 + a1 * b23 - a2 * b13 + a3 * b12
            + a12 * b3 - a13 * b2 + a23 * b1 + a123 * b0,
        ],
        axis=-1,
    )
    return out


@dataclass(frozen=True)
class Multivector:
    """A single element of the 3D geometric algebra.

    Parameters
    ----------
    s : float
        Scalar part.
    v : tuple of 3 floats
        Coefficients of ``e1, e2, e3``.
    b : tuple of 3 floats
        Coefficients of ``e12, e13, e23``.
    t : float
        Coefficient of the pseudoscalar ``e123``.
    """

    s: float = 0.0
    v: tuple[float, float, float] = (0.0, 0.0, 0.0)
    b: tuple[float, float, float] = (0.0, 0.0, 0.0)
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "v", tuple(float(x) for x in self.v))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        object.__setattr__(self, "t", float(self.t))
        if len(self.v) != 3 or len(self.b) != 3:
            raise ValueError("vector and bivector parts need 3 components each")
        if not np.all(np.isfinite(self.components)):
            raise ValueError("multivector components must be finite")

    @classmethod
    def from_array(cls, arr) -> "Multivector":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (8,):
            raise ValueError(f"expected 8 components, got shape {arr.shape}")
        return cls(arr[0], tuple(arr[1:4]), tuple(arr[4:7]), arr[7])

    @classmethod
    def vector(cls, x, y, z) -> "Multivector":
        return cls(v=(x, y, z))

    @property
    def components(self) -> np.ndarray:
        return np.array([self.s, *self.v, *self.b, self.t])

    def __add__(self, other: "Multivector") -> "Multivector":
        return Multivector.from_array(self.components + other.components)

    def __sub__(self, other: "Multivector") -> "Multivector":
        return Multivector.from_array(self.components - other.components)

    def __neg__(self) -> "Multivector":
        return Multivector.from_array(-self.components)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        return Multivector.from_array(self.components * float(other))

    __rmul__ = __mul__


@dataclass(frozen=True)
class InvariantVec:
    """Rotation-invariant summary of a multivector."""

    scalar: float
    vec_norm: float
    bivec_norm: float
    trivector: float

    def as_array(self) -> np.ndarray:
        return np.array([self.scalar, self.vec_norm, self.bivec_norm, self.trivector])


def geometric_product(a, b):
    """Geometric product ``ab``.

    Accepts :class:`Multivector` values or broadcastable ``(..., 8)`` arrays;
    the return type follows the inputs.
    """
    out = _gp(_as_array(a), _as_array(b))
    if isinstance(a, Multivector) and isinstance(b, Multivector):
        return Multivector.from_array(out)
    return out


def vector_to_multivector(x) -> np.ndarray:
    """Embed ``(..., 3)`` vectors as ``(..., 8)`` multivectors."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(x.shape[:-1] + (8,))
    out[..., VECTOR] = x
    return out


def product_chain(vectors: Sequence) -> np.ndarray:
    """Left-folded geometric product ``r_1 r_2 ... r_n`` of 3-vectors.

    ``vectors`` may be a sequence of ``(..., 3)`` arrays (broadcast against
    each other) or a single array whose axis ``-2`` runs over the factors.
    """
    if isinstance(vectors, np.ndarray):
        vectors = [vectors[..., i, :] for i in range(vectors.shape[-2])]
    if len(vectors) == 0:
        raise ValueError("product_chain needs at least one vector")
    result = vector_to_multivector(vectors[0])
    for vec in vectors[1:]:
        result = _gp(result, vector_to_multivector(vec))
    return result


def invariants(m):
    """Return ``(scalar, |vector|, |bivector|, trivector)``.

    For an array input the result is a ``(..., 4)`` array; for a
    :class:`Multivector` it is an :class:`InvariantVec`.
    """
    arr = _as_array(m)
    out = np.stack(
        [
            arr[..., 0],
            np.linalg.norm(arr[..., VECTOR], axis=-1),
            np.linalg.norm(arr[..., BIVECTOR], axis=-1),
            arr[..., 7],
        ],
        axis=-1,
    )
    if isinstance(m, Multivector):
        return InvariantVec(*out)
    return out


def covariant_vector(m, parity: str) -> np.ndarray:
    """Extract a rotation-covariant 3-vector from a product of vectors.

    Odd products contribute their vector part directly. Even products carry
    only scalar and bivector parts; the bivector is turned into a vector by
    right-multiplying with the unit pseudoscalar ``e123``.
    """
    arr = _as_array(m)
    if parity == "odd":
        return arr[..., VECTOR].copy()
    if parity == "even":
        return arr[..., BIVECTOR] @ DUAL_MATRIX
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def reverse(m) -> np.ndarray:
    """Reversion: flips the sign of bivector and trivector parts."""
    arr = _as_array(m).copy()
    arr[..., 4:] *= -1.0
    return arr


def structure_constants() -> np.ndarray:
    """Tensor ``C`` with ``(ab)_k = sum_ij a_i b_j C[i, j, k]``."""
    eye = np.eye(8)
    return _gp(eye[:, None, :], eye[None, :, :])


@dataclass(frozen=True)
class Rotation:
    """Proper rotation stored as a unit quaternion ``(w, x, y, z)``."""

    quaternion: tuple[float, float, float, float]

    def __post_init__(self):
        q = np.asarray(self.quaternion, dtype=np.float64)
        if q.shape != (4,) or not np.all(np.isfinite(q)):
            raise ValueError("quaternion must be 4 finite numbers")
        if abs(np.linalg.norm(q) - 1.0) > 1e-12:
            raise ValueError(f"quaternion is not unit length (|q| = {np.linalg.norm(q)!r})")
        object.__setattr__(self, "quaternion", tuple(float(x) for x in q))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls((1.0, 0.0, 0.0, 0.0))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        half = 0.5 * angle
        q = np.concatenate([[np.cos(half)], np.sin(half) * axis])
        return cls(tuple(q / np.linalg.norm(q)))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        """Uniformly distributed rotation (normalized Gaussian quaternion)."""
        q = rng.standard_normal(4)
        return cls(tuple(q / np.linalg.norm(q)))

    @classmethod
    def from_matrix(cls, matrix) -> "Rotation":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("rotation matrix must be 3x3")
        if abs(np.linalg.det(m) - 1.0) > 1e-12 or not np.allclose(m @ m.T, np.eye(3), atol=1e-12):
            raise ValueError("matrix is not a proper rotation")
        # Shepperd's method: pivot on the largest diagonal combination
        tr = np.trace(m)
        cands = [tr, m[0, 0], m[1, 1], m[2, 2]]
        k = int(np.argmax(cands))
        if k == 0:
            w = 0.5 * np.sqrt(1.0 + tr)
            q = [w, (m[2, 1] - m[1, 2]) / (4 * w), (m[0, 2] - m[2, 0]) / (4 * w), (m[1, 0] - m[0, 1]) / (4 * w)]
        elif k == 1:
            x = 0.5 * np.sqrt(1.0 + 2 * m[0, 0] - tr)
            q = [(m[2, 1] - m[1, 2]) / (4 * x), x, (m[0, 1] + m[1, 0]) / (4 * x), (m[0, 2] + m[2, 0]) / (4 * x)]
        elif k == 2:
            y = 0.5 * np.sqrt(1.0 + 2 * m[1, 1] - tr)
            q = [(m[0, 2] - m[2, 0]) / (4 * y), (m[0, 1] + m[1, 0]) / (4 * y), y, (m[1, 2] + m[2, 1]) / (4 * y)]
        else:
            z = 0.5 * np.sqrt(1.0 + 2 * m[2, 2] - tr)
            q = [(m[1, 0] - m[0, 1]) / (4 * z), (m[0, 2] + m[2, 0]) / (4 * z), (m[1, 2] + m[2, 1]) / (4 * z), z]
        q = np.asarray(q)
        return cls(tuple(q / np.linalg.norm(q)))

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.quaternion
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def rotor(self) -> np.ndarray:
        """Even multivector ``q`` such that ``q v q~`` rotates vectors ``v``."""
        w, x, y, z = self.quaternion
        return np.array([w, 0.0, 0.0, 0.0, -z, y, -x, 0.0])

    def apply(self, vectors) -> np.ndarray:
        """Rotate ``(..., 3)`` vectors."""
        return np.asarray(vectors, dtype=np.float64) @ self.as_matrix().T

    def inverse(self) -> "Rotation":
        w, x, y, z = self.quaternion
        return Rotation((w, -x, -y, -z))


def rotate(m, rotation: Rotation):
    """Rotate a multivector with the rotor sandwich ``q m q~``."""
    if not isinstance(rotation, Rotation):
        raise TypeError("rotation must be a Rotation")
    q = rotation.rotor()
    out = _gp(_gp(q, _as_array(m)), reverse(q))
    if isinstance(m, Multivector):
        return Multivector.from_array(out)
    return out
