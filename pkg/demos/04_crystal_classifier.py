"""Classify crystal structures from the 12 nearest neighbors of each particle.

Takes about a minute. Increase ``per_class`` and ``max_epochs`` for the
full-size run.
"""
import numpy as np

from geomattn import datasets as D
from geomattn import training as TR
from geomattn.attention_maps import attention_records
from geomattn.models import ModelSpec, bond_type_values, build_crystal_classifier

prototypes = ["cF4-Cu", "cI2-W", "hP2-Mg", "cP2-CsCl"]

# Each prototype is rescaled to unit nearest-neighbor distance, replicated
# to at least 2048 particles and shaken with Gaussian noise.
structure = D.generate_structure("hP2-Mg", noise_sigma=1e-3, seed=0)
print(len(structure), "particles in a box of", np.round(structure.box, 3))

envs = D.make_environment_dataset(prototypes, sigmas=[1e-3], per_class=250, seed=0)
train, val, test = (envs.subset(i) for i in D.split_indices(envs.labels))
print("environments:", len(train), len(val), len(test))

spec = ModelSpec.defaults("classify", num_classes=len(prototypes), num_types=2)
model = build_crystal_classifier(spec)
print("parameters:", model.parameter_count())

cfg = TR.TrainConfig(max_epochs=8, batch_size=32)
for record in TR.train_classifier(model, train, val, cfg):
    print(f"epoch {record['epoch']}: val accuracy {record['val_accuracy']:.3f}")
print("test:", TR.evaluate_classifier(model, test))

# Attention over neighbor pairs for one environment; strong pairs first.
values = bond_type_values(test.center_types[:1], test.neighbor_types[:1], 2)
(rec,) = attention_records(model, {"bonds": test.bonds[:1], "bond_values": values}, filter_below=0.01)
top = np.argsort(rec["weights"])[::-1][:5]
for k in top:
    print("pair", rec["tuples"][k], "weight", round(rec["weights"][k], 4))
