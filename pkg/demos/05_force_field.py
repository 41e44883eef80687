"""A conservative force field: forces are minus the gradient of a learned energy."""
import numpy as np

from geomattn import datasets as D
from geomattn import training as TR
from geomattn.algebra import Rotation
from geomattn.models import ModelSpec, build_force_regressor

# Displaced copies of a five-atom molecule with Morse pair forces.
data = D.make_force_dataset(40, seed=0)
train, val = data.subset(np.arange(32)), data.subset(np.arange(32, 40))

model = build_force_regressor(ModelSpec.defaults("force", num_types=len(data.symbols), n_blocks=2))
print("parameters:", model.parameter_count())

energy, forces = model.energy_and_forces(data.coords[0], data.types[0])
print("net force on the molecule:", np.abs(forces.data.sum(axis=0)).max())

R = Rotation.random(np.random.default_rng(0)).as_matrix()
turned = model(data.coords[0] @ R.T, data.types[0]).data
print("F(Rx) - R F(x):", np.abs(turned - forces.data @ R.T).max())

print("before training:", TR.evaluate_force(model, val))
cfg = TR.TrainConfig(max_epochs=30, batch_size=8, learning_rate=2e-3, loss="force_mse")
TR.train_force(model, train, val, cfg)
print("after training: ", TR.evaluate_force(model, val))

# A short step along the forces lowers the energy.
f = model(data.coords[0], data.types[0]).data
step = data.coords[0] + 1e-3 * f / np.linalg.norm(f)
print("energy change:", model.energy(step, data.types[0]).item() - model.energy(data.coords[0], data.types[0]).item())
