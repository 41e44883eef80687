"""The three attention layers and their symmetry properties."""
import numpy as np

from geomattn import nn
from geomattn.algebra import Rotation
from geomattn.attention import AttentionConfig, LabeledVectorAttention, Vector2VectorAttention, VectorAttention

rng = np.random.default_rng(1)
store = nn.ParameterStore(seed=0)
cfg = AttentionConfig(working_dim=16, hidden_dim=32)

coords = rng.normal(size=(6, 3))
values = rng.normal(size=(6, 16))
R = Rotation.random(rng).as_matrix()
perm = rng.permutation(6)

# Invariant values: one output per point, unchanged when the cloud turns.
att = VectorAttention(store, "values", cfg)
out, weights = att(coords, values, return_attention=True)
print("output", out.shape, "weights", weights.shape)
print("rotation change", np.abs(att(coords @ R.T, values).data - out.data).max())
print("permutation change", np.abs(att(coords[perm], values[perm]).data - out.data[perm]).max())
print("weights per point sum to", weights.data.sum(axis=-1)[:3])

# Triplets instead of pairs: N^3 tuples.
att3 = VectorAttention(store, "triplets", cfg.replace(rank=3))
print("rank 3 output", att3(coords, values).shape)

# Covariant vectors: outputs turn with the cloud.
v2v = Vector2VectorAttention(store, "vectors", cfg)
vec = v2v(coords, values).data
print("f(Rx) - R f(x):", np.abs(v2v(coords @ R.T, values).data - vec @ R.T).max())

# One vector per label, computed from a shared reference cloud.
labeled = LabeledVectorAttention(store, "labels", cfg)
labels = rng.normal(size=(3, 16))
labels[2] = labels[0]
placed = labeled(labels, coords, values).data
print("identical labels give identical vectors:", np.array_equal(placed[0], placed[2]))

# Masked points take no part in any softmax group.
mask = np.array([True, True, True, True, False, False])
out_masked, w = att(coords, values, mask, return_attention=True)
print("weight on masked points:", w.data[:, 4:].max())
print("parameters in this store:", store.count())
