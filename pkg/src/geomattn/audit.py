"""Property checks for trained or untrained models.

Each check returns the largest deviation it observed so a caller can
compare against a tolerance; :func:`audit_model` bundles the checks that
apply to a model's task.
"""
from __future__ import annotations

import numpy as np

from .algebra import Rotation
from .models import Backmapper, CrystalClassifier, ForceRegressor, bond_type_values

__all__ = ["TOLERANCES", "audit_model", "random_inputs"]

# per dtype: rotation, permutation, force gradient (relative) and net force
TOLERANCES = {
    "float64": {"rotation": 1e-9, "permutation": 1e-9, "gradient": 1e-5, "net_force": 1e-9},
    "float32": {"rotation": 1e-4, "permutation": 1e-4, "gradient": None, "net_force": 1e-4},
}


def random_inputs(model, rng: np.random.Generator, n_points: int | None = None):
    """Random inputs of the right shape for one cloud of ``model``."""
    spec = model.spec
    if isinstance(model, CrystalClassifier):
        k = n_points or 12
        bonds = rng.normal(size=(1, k, 3))
        values = bond_type_values(rng.integers(0, spec.num_types, 1),
                                  rng.integers(0, spec.num_types, (1, k)), spec.num_types)
        return {"bonds": bonds, "bond_values": values}
    if isinstance(model, ForceRegressor):
        n = n_points or 5
        return {"coords": rng.normal(size=(n, 3)), "types": rng.integers(0, spec.num_types, n)}
    if isinstance(model, Backmapper):
        n = n_points or 5
        return {
            "coords": rng.normal(size=(n, 3)),
            "bead_types": rng.integers(0, spec.num_types, n),
            "atom_labels": np.arange(spec.num_atom_labels),
        }
    raise TypeError(f"unsupported model {type(model).__name__}")


def _output(model, inputs):
    if isinstance(model, CrystalClassifier):
        return model(inputs["bonds"], inputs["bond_values"]).data
    if isinstance(model, ForceRegressor):
        return model(inputs["coords"], inputs["types"]).data
    return model(inputs["coords"], inputs["bead_types"], inputs["atom_labels"]).data


def _rotated(inputs, R):
    out = dict(inputs)
    key = "bonds" if "bonds" in inputs else "coords"
    out[key] = inputs[key] @ R.T
    return out


def _permuted(inputs, perm):
    out = dict(inputs)
    if "bonds" in inputs:
        out["bonds"] = inputs["bonds"][:, perm]
        out["bond_values"] = inputs["bond_values"][:, perm]
    elif "types" in inputs:
        out["coords"], out["types"] = inputs["coords"][perm], inputs["types"][perm]
    else:
        out["coords"], out["bead_types"] = inputs["coords"][perm], inputs["bead_types"][perm]
    return out


def rotation_deviation(model, inputs, rotations) -> float:
    """Largest ``|f(Rx) - R f(x)|`` (covariant outputs) or ``|f(Rx) - f(x)|``."""
    base = _output(model, inputs)
    covariant = not isinstance(model, CrystalClassifier)
    worst = 0.0
    for rot in rotations:
        R = rot.as_matrix()
        expected = base @ R.T if covariant else base
        worst = max(worst, float(np.max(np.abs(_output(model, _rotated(inputs, R)) - expected))))
    return worst


def permutation_deviation(model, inputs, perms) -> float:
    """Largest deviation from permuted (forces) or unchanged (others) outputs."""
    base = _output(model, inputs)
    worst = 0.0
    for perm in perms:
        expected = base[perm] if isinstance(model, ForceRegressor) else base
        worst = max(worst, float(np.max(np.abs(_output(model, _permuted(inputs, perm)) - expected))))
    return worst


def gradient_deviation(model: ForceRegressor, inputs, h: float = 1e-5) -> tuple[float, float]:
    """Relative error of forces against central differences of the energy,
    and the magnitude of the net force."""
    coords, types = inputs["coords"], inputs["types"]
    _, forces = model.energy_and_forces(coords, types)
    fd = np.zeros_like(coords)
    for idx in np.ndindex(coords.shape):
        plus, minus = coords.copy(), coords.copy()
        plus[idx] += h
        minus[idx] -= h
        fd[idx] = -(model.energy(plus, types).item() - model.energy(minus, types).item()) / (2 * h)
    rel = float(np.linalg.norm(forces.data - fd) / max(np.linalg.norm(fd), 1e-300))
    return rel, float(np.linalg.norm(forces.data.sum(axis=0)))


def audit_model(model, n_rotations: int = 20, n_permutations: int = 20, n_clouds: int = 3,
                seed: int = 0) -> dict:
    """Run every applicable property check.

    Returns a dict with the maximum deviation per check, the tolerance used
    and an overall ``passed`` flag.
    """
    rng = np.random.default_rng(seed)
    tol = TOLERANCES[model.spec.dtype]
    worst = {"rotation": 0.0, "permutation": 0.0}
    if isinstance(model, ForceRegressor) and tol["gradient"] is not None:
        worst.update(gradient=0.0, net_force=0.0)
    for _ in range(n_clouds):
        inputs = random_inputs(model, rng)
        n = len(inputs.get("coords", inputs.get("bonds", [[]])[0]))
        rotations = [Rotation.random(rng) for _ in range(n_rotations)]
        perms = [rng.permutation(n) for _ in range(n_permutations)]
        worst["rotation"] = max(worst["rotation"], rotation_deviation(model, inputs, rotations))
        worst["permutation"] = max(worst["permutation"], permutation_deviation(model, inputs, perms))
        if "gradient" in worst:
            rel, net = gradient_deviation(model, inputs)
            worst["gradient"] = max(worst["gradient"], rel)
            worst["net_force"] = max(worst["net_force"], net)
    checks = {
        name: {"max_deviation": value, "tolerance": tol[name], "passed": value <= tol[name]}
        for name, value in worst.items()
    }
    return {"checks": checks, "passed": all(c["passed"] for c in checks.values())}
