"""Synthetic data and text formats.

* Crystal prototypes, noisy periodic structures and k-nearest-neighbor
  environments for structure classification.
* Rigid coarse-grain motifs for backmapping.
* Small molecules with pairwise Morse forces for force regression.
* Extended-XYZ style reading and writing.
"""
from __future__ import annotations

import json
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .algebra import Rotation

__all__ = [
    "DataError",
    "CrystalPrototype",
    "PROTOTYPES",
    "get_prototype",
    "Structure",
    "generate_structure",
    "NeighborList",
    "nearest_neighbors",
    "EnvironmentSet",
    "extract_environments",
    "make_environment_dataset",
    "split_indices",
    "BackmapData",
    "canonical_motifs",
    "make_backmap_dataset",
    "ForceData",
    "morse_energy_forces",
    "make_force_dataset",
    "Frame",
    "read_xyz",
    "write_xyz",
    "write_manifest",
    "structure_to_frame",
    "frame_to_structure",
    "backmap_to_frames",
    "frames_to_backmap",
    "frames_to_force_data",
    "force_data_to_frames",
]


class DataError(ValueError):
    """Malformed or inconsistent input data."""


# -- crystal prototypes --------------------------------------------------------


@dataclass(frozen=True)
class CrystalPrototype:
    """Orthorhombic conventional cell with fractional basis positions."""

    name: str
    cell: tuple[float, float, float]
    basis: tuple[tuple[float, float, float], ...]
    types: tuple[int, ...]

    @property
    def lattice(self) -> np.ndarray:
        return np.diag(self.cell)

    def cartesian_basis(self) -> np.ndarray:
        return np.asarray(self.basis) * np.asarray(self.cell)

    def nearest_distance(self) -> float:
        """Shortest interparticle distance of the infinite structure."""
        pos = self.cartesian_basis()
        shifts = np.array([[i, j, k] for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)])
        images = (pos[None, :, :] + (shifts * np.asarray(self.cell))[:, None, :]).reshape(-1, 3)
        d = np.linalg.norm(pos[:, None, :] - images[None, :, :], axis=-1)
        return float(d[d > 1e-12].min())

    def rescaled(self) -> "CrystalPrototype":
        """Copy whose shortest neighbor distance is 1."""
        scale = 1.0 / self.nearest_distance()
        return CrystalPrototype(self.name, tuple(c * scale for c in self.cell), self.basis, self.types)


_FCC = ((0.0, 0.0, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5), (0.5, 0.5, 0.0))
_C_OVER_A = float(np.sqrt(8.0 / 3.0))

PROTOTYPES: dict[str, CrystalPrototype] = {
    p.name: p
    for p in [
        CrystalPrototype("cF4-Cu", (1.0, 1.0, 1.0), _FCC, (0, 0, 0, 0)),
        CrystalPrototype("cI2-W", (1.0, 1.0, 1.0), ((0.0, 0.0, 0.0), (0.5, 0.5, 0.5)), (0, 0)),
        # hexagonal close packing in its orthohexagonal setting (a, sqrt(3) a, c)
        CrystalPrototype(
            "hP2-Mg",
            (1.0, float(np.sqrt(3.0)), _C_OVER_A),
            ((0.0, 1 / 3, 0.25), (0.5, 5 / 6, 0.25), (0.5, 1 / 6, 0.75), (0.0, 2 / 3, 0.75)),
            (0, 0, 0, 0),
        ),
        CrystalPrototype("cP2-CsCl", (1.0, 1.0, 1.0), ((0.0, 0.0, 0.0), (0.5, 0.5, 0.5)), (0, 1)),
        CrystalPrototype(
            "cF8-ZnS",
            (1.0, 1.0, 1.0),
            _FCC + tuple((x + 0.25, y + 0.25, z + 0.25) for x, y, z in _FCC),
            (0, 0, 0, 0, 1, 1, 1, 1),
        ),
        CrystalPrototype(
            "cF8-C",
            (1.0, 1.0, 1.0),
            _FCC + tuple((x + 0.25, y + 0.25, z + 0.25) for x, y, z in _FCC),
            (0,) * 8,
        ),
    ]
}


def get_prototype(name: str) -> CrystalPrototype:
    try:
        return PROTOTYPES[name]
    except KeyError:
        raise KeyError(f"unknown prototype {name!r}; choose from {sorted(PROTOTYPES)}") from None


@dataclass
class Structure:
    positions: np.ndarray
    types: np.ndarray
    box: np.ndarray  # orthorhombic box lengths
    label: str = ""
    sigma: float = 0.0
    seed: int | None = None

    def __len__(self):
        return len(self.positions)


def _replicas(cell: np.ndarray, n_basis: int, min_particles: int) -> np.ndarray:
    """Smallest near-cubic replication with at least ``min_particles``."""
    length = cell.max()
    while True:
        reps = np.maximum(1, np.round(length / cell)).astype(int)
        if reps.prod() * n_basis >= min_particles:
            return reps
        length += 0.25 * cell.min()


def generate_structure(prototype, noise_sigma: float = 0.0, min_particles: int = 2048, seed: int = 0) -> Structure:
    """Replicated, rescaled prototype with isotropic Gaussian displacements.

    Particles are not wrapped back into the box after displacement; neighbor
    searches use minimum-image distances.
    """
    if isinstance(prototype, str):
        prototype = get_prototype(prototype)
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    proto = prototype.rescaled()
    cell = np.asarray(proto.cell)
    basis = proto.cartesian_basis()
    reps = _replicas(cell, len(basis), min_particles)
    grid = np.stack(np.meshgrid(*[np.arange(n) for n in reps], indexing="ij"), -1).reshape(-1, 3)
    positions = (grid[:, None, :] * cell + basis[None, :, :]).reshape(-1, 3)
    types = np.tile(np.asarray(proto.types), len(grid))
    rng = np.random.default_rng(seed)
    if noise_sigma > 0:
        positions = positions + rng.normal(scale=noise_sigma, size=positions.shape)
    return Structure(positions, types, reps * cell, proto.name, float(noise_sigma), seed)


# -- neighbors -----------------------------------------------------------------


@dataclass
class NeighborList:
    indices: np.ndarray  # (Q, k)
    vectors: np.ndarray  # (Q, k, 3), neighbor minus center (minimum image)
    distances: np.ndarray  # (Q, k)


def nearest_neighbors(points, box=None, k: int = 12, query=None, chunk: int = 256) -> NeighborList:
    """Brute-force k nearest neighbors with minimum-image periodic distances.

    Parameters
    ----------
    points : (N, 3) array
    box : None, (3,) box lengths or a diagonal (3, 3) matrix
        Orthorhombic periodic box; ``None`` disables periodicity.
    k : int
        Neighbors per point, excluding the point itself.
    query : optional index array
        Restrict the centers to these points.

    Ties in distance are broken by the lower neighbor index.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if k >= n:
        raise ValueError(f"k={k} needs more than {n} points")
    if box is not None:
        box = np.asarray(box, dtype=np.float64)
        if box.shape == (3, 3):
            if np.any(box - np.diag(np.diag(box))):
                raise ValueError("only orthorhombic boxes are supported")
            box = np.diag(box)
        if box.shape != (3,) or np.any(box <= 0):
            raise ValueError("box must hold three positive lengths")
    query = np.arange(n) if query is None else np.asarray(query, dtype=np.int64)
    idx_out = np.empty((len(query), k), dtype=np.int64)
    vec_out = np.empty((len(query), k, 3))
    dist_out = np.empty((len(query), k))
    for start in range(0, len(query), chunk):
        q = query[start:start + chunk]
        delta = points[None, :, :] - points[q, None, :]
        if box is not None:
            delta -= box * np.round(delta / box)
        dist = np.linalg.norm(delta, axis=-1)
        dist[np.arange(len(q)), q] = np.inf
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        rows = np.arange(len(q))[:, None]
        idx_out[start:start + len(q)] = order
        vec_out[start:start + len(q)] = delta[rows, order]
        dist_out[start:start + len(q)] = dist[rows, order]
    return NeighborList(idx_out, vec_out, dist_out)


@dataclass
class EnvironmentSet:
    """Neighbor environments: bonds ``(S, k, 3)``, center and neighbor types, labels."""

    bonds: np.ndarray
    center_types: np.ndarray
    neighbor_types: np.ndarray
    labels: np.ndarray
    class_names: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "EnvironmentSet":
        return EnvironmentSet(self.bonds[idx], self.center_types[idx], self.neighbor_types[idx],
                              self.labels[idx], list(self.class_names))

    @staticmethod
    def concat(sets: Sequence["EnvironmentSet"]) -> "EnvironmentSet":
        return EnvironmentSet(
            np.concatenate([s.bonds for s in sets]),
            np.concatenate([s.center_types for s in sets]),
            np.concatenate([s.neighbor_types for s in sets]),
            np.concatenate([s.labels for s in sets]),
            list(sets[0].class_names),
        )


def extract_environments(structure: Structure, k: int = 12, centers=None, label: int = 0,
                         class_names=()) -> EnvironmentSet:
    nl = nearest_neighbors(structure.positions, structure.box, k, query=centers)
    centers = np.arange(len(structure)) if centers is None else np.asarray(centers)
    return EnvironmentSet(
        nl.vectors,
        structure.types[centers],
        structure.types[nl.indices],
        np.full(len(centers), label, dtype=np.int64),
        list(class_names),
    )


def make_environment_dataset(prototypes: Sequence[str], sigmas: Sequence[float], per_class: int,
                             seed: int = 0, k: int = 12, min_particles: int = 2048) -> EnvironmentSet:
    """Balanced environments: ``per_class`` per prototype, split evenly over ``sigmas``."""
    rng = np.random.default_rng(seed)
    names = list(prototypes)
    parts = []
    for label, name in enumerate(names):
        counts = [per_class // len(sigmas) + (i < per_class % len(sigmas)) for i in range(len(sigmas))]
        for sigma, count in zip(sigmas, counts):
            if count == 0:
                continue
            structure = generate_structure(name, sigma, min_particles, seed=int(rng.integers(2**31)))
            if count > len(structure):
                raise ValueError(f"{name}: {count} environments requested from {len(structure)} particles")
            centers = np.sort(rng.choice(len(structure), size=count, replace=False))
            parts.append(extract_environments(structure, k, centers, label, names))
    return EnvironmentSet.concat(parts)


def split_indices(labels, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> list[np.ndarray]:
    """Stratified random split of sample indices."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fractions = np.asarray(fractions, dtype=float)
    fractions = fractions / fractions.sum()
    out = [[] for _ in fractions]
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        bounds = np.round(np.cumsum(fractions) * len(idx)).astype(int)
        start = 0
        for part, stop in zip(out, bounds):
            part.extend(idx[start:stop])
            start = stop
    return [np.sort(np.asarray(p, dtype=np.int64)) for p in out]


# -- backmapping ---------------------------------------------------------------


@dataclass
class BackmapData:
    coords: np.ndarray  # (S, n_beads, 3) bead positions, central bead at the origin
    bead_types: np.ndarray  # (S, n_beads)
    atom_labels: np.ndarray  # (S, n_atoms)
    targets: np.ndarray  # (S, n_atoms, 3)
    kinds: np.ndarray  # (S,)
    rotations: np.ndarray  # (S, 4) quaternions applied to the canonical motif

    def __len__(self):
        return len(self.kinds)

    def subset(self, idx) -> "BackmapData":
        return BackmapData(self.coords[idx], self.bead_types[idx], self.atom_labels[idx],
                           self.targets[idx], self.kinds[idx], self.rotations[idx])


def canonical_motifs(n_kinds: int = 4, n_beads: int = 5, n_atoms: int = 4):
    """Fixed rigid motifs, one per residue kind.

    Returns ``(bead_coords, bead_types, atom_coords)`` with shapes
    ``(K, n_beads, 3)``, ``(K, n_beads)`` and ``(K, n_atoms, 3)``. Bead 0 is
    the central bead at the origin and has type ``kind``; the atoms hang off
    it at distances of about 0.5.
    """
    rng = np.random.default_rng(20220126)
    beads = np.zeros((n_kinds, n_beads, 3))
    atoms = np.zeros((n_kinds, n_atoms, 3))
    types = np.zeros((n_kinds, n_beads), dtype=np.int64)
    for kind in range(n_kinds):
        dirs = rng.normal(size=(n_beads - 1, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        beads[kind, 1:] = dirs * rng.uniform(1.2, 2.0, size=(n_beads - 1, 1))
        types[kind, 0] = kind
        types[kind, 1:] = rng.integers(0, n_kinds, size=n_beads - 1)
        atoms[kind] = rng.normal(scale=0.4, size=(n_atoms, 3))
    return beads, types, atoms


def make_backmap_dataset(n_samples: int, seed: int = 0, n_kinds: int = 4, n_beads: int = 5,
                         n_atoms: int = 4, random_rotation: bool = True) -> BackmapData:
    """Rigid motifs under random global rotations; targets rotate with the beads."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    beads, types, atoms = canonical_motifs(n_kinds, n_beads, n_atoms)
    rng = np.random.default_rng(seed)
    kinds = np.arange(n_samples) % n_kinds
    rng.shuffle(kinds)
    quats = np.zeros((n_samples, 4))
    coords = np.empty((n_samples, n_beads, 3))
    targets = np.empty((n_samples, n_atoms, 3))
    for s, kind in enumerate(kinds):
        rot = Rotation.random(rng) if random_rotation else Rotation.identity()
        quats[s] = rot.quaternion
        coords[s] = rot.apply(beads[kind])
        targets[s] = rot.apply(atoms[kind])
    labels = np.tile(np.arange(n_atoms), (n_samples, 1))
    return BackmapData(coords, types[kinds], labels, targets, kinds, quats)


# -- molecular forces ------------------------------------------------------------


@dataclass
class ForceData:
    coords: np.ndarray  # (S, N, 3)
    types: np.ndarray  # (S, N)
    forces: np.ndarray  # (S, N, 3)
    energies: np.ndarray  # (S,)
    symbols: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.coords)

    def subset(self, idx) -> "ForceData":
        return ForceData(self.coords[idx], self.types[idx], self.forces[idx], self.energies[idx], list(self.symbols))


def morse_energy_forces(coords, depth=1.0, width=1.5, r0=1.0):
    """Total Morse pair energy and forces for ``(N, 3)`` coordinates."""
    coords = np.asarray(coords, dtype=np.float64)
    delta = coords[:, None, :] - coords[None, :, :]
    r = np.linalg.norm(delta, axis=-1)
    iu = np.triu_indices(len(coords), 1)
    x = np.exp(-width * (r - r0))
    pair_e = depth * (1.0 - x) ** 2
    energy = float(pair_e[iu].sum())
    dedr = 2.0 * depth * width * (1.0 - x) * x
    np.fill_diagonal(r, 1.0)
    coef = dedr / r
    np.fill_diagonal(coef, 0.0)
    forces = -np.sum(coef[:, :, None] * delta, axis=1)
    return energy, forces


def make_force_dataset(n_frames: int, seed: int = 0, n_atoms: int = 5, sigma: float = 0.08,
                       symbols=("C", "H", "O")) -> ForceData:
    """Thermally displaced copies of a small molecule with Morse forces."""
    rng = np.random.default_rng(seed)
    base = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [-0.3, 0.95, 0.0],
                     [-0.3, -0.45, 0.85], [1.4, 0.9, 0.2], [0.5, -0.8, -0.7]])
    if n_atoms > len(base):
        raise ValueError(f"at most {len(base)} atoms supported")
    base = base[:n_atoms]
    types = np.array([0, 0, 1, 2, 1, 1][:n_atoms]) % len(symbols)
    coords = base[None] + rng.normal(scale=sigma, size=(n_frames, n_atoms, 3))
    energies = np.empty(n_frames)
    forces = np.empty_like(coords)
    for s in range(n_frames):
        energies[s], forces[s] = morse_energy_forces(coords[s])
    return ForceData(coords, np.tile(types, (n_frames, 1)), forces, energies, list(symbols))


# -- extended XYZ ------------------------------------------------------------------


@dataclass
class Frame:
    symbols: list[str]
    positions: np.ndarray
    forces: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.symbols)


def _format_value(value) -> str:
    if isinstance(value, (list, tuple, np.ndarray)):
        return '"' + " ".join(_format_value(v) for v in np.ravel(value)) + '"'
    if isinstance(value, (bool, np.bool_)):
        return "T" if value else "F"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    text = str(value)
    return shlex.quote(text) if (" " in text or not text) else text


def _parse_value(text: str):
    parts = text.split()
    if len(parts) > 1:
        items = [_parse_value(p) for p in parts]
        # numeric arrays become lists; anything else stays a plain string
        return items if not any(isinstance(x, str) for x in items) else text
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text in ("T", "F"):
        return text == "T"
    return text


def write_xyz(path, frames: Sequence[Frame]) -> None:
    """Write frames; floats use 17 significant digits so they round-trip."""
    lines = []
    for frame in frames:
        if len(frame) == 0:
            raise DataError("cannot write an empty frame")
        has_forces = frame.forces is not None
        props = "species:S:1:pos:R:3" + (":forces:R:3" if has_forces else "")
        info = {k: v for k, v in frame.info.items() if k != "Properties"}
        comment = " ".join(f"{k}={_format_value(v)}" for k, v in info.items())
        lines.append(str(len(frame)))
        lines.append(f"Properties={props} {comment}".rstrip())
        for i, sym in enumerate(frame.symbols):
            row = [sym] + ["%.17g" % x for x in frame.positions[i]]
            if has_forces:
                row += ["%.17g" % x for x in frame.forces[i]]
            lines.append(" ".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_xyz(path) -> list[Frame]:
    """Parse an extended-XYZ style file.

    Raises
    ------
    DataError
        On empty frames, count mismatches or malformed rows.
    """
    raw = Path(path).read_text().splitlines()
    frames = []
    pos = 0
    while pos < len(raw):
        if not raw[pos].strip():
            pos += 1
            continue
        try:
            count = int(raw[pos].strip())
        except ValueError:
            raise DataError(f"{path}:{pos + 1}: expected an atom count, got {raw[pos]!r}") from None
        if count <= 0:
            raise DataError(f"{path}:{pos + 1}: empty frame")
        if pos + 2 + count > len(raw):
            raise DataError(f"{path}:{pos + 1}: frame declares {count} atoms but the file ends early")
        info = {}
        try:
            tokens = shlex.split(raw[pos + 1])
        except ValueError as exc:
            raise DataError(f"{path}:{pos + 2}: bad comment line ({exc})") from None
        for token in tokens:
            if "=" not in token:
                raise DataError(f"{path}:{pos + 2}: malformed key=value entry {token!r}")
            key, value = token.split("=", 1)
            info[key] = _parse_value(value)
        symbols, positions, forces = [], [], []
        for lineno in range(pos + 2, pos + 2 + count):
            parts = raw[lineno].split()
            if len(parts) not in (4, 7):
                raise DataError(f"{path}:{lineno + 1}: expected 4 or 7 columns, got {len(parts)}")
            try:
                values = [float(x) for x in parts[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno + 1}: non-numeric coordinate") from None
            symbols.append(parts[0])
            positions.append(values[:3])
            forces.append(values[3:] if len(values) == 6 else None)
        have = [f is not None for f in forces]
        if any(have) and not all(have):
            raise DataError(f"{path}:{pos + 1}: force columns present on only some rows")
        info.pop("Properties", None)
        frames.append(Frame(symbols, np.array(positions), np.array(forces) if all(have) else None, info))
        pos += 2 + count
    if not frames:
        raise DataError(f"{path}: no frames found")
    return frames


def write_manifest(path, **entries) -> None:
    Path(path).write_text(json.dumps(entries, indent=2, sort_keys=True))


def _type_symbols(n: int) -> list[str]:
    return [chr(ord("A") + i) for i in range(n)]


def structure_to_frame(structure: Structure) -> Frame:
    symbols = _type_symbols(int(structure.types.max()) + 1)
    box = np.diag(structure.box)
    info = {"label": structure.label, "sigma": structure.sigma, "Lattice": box, "pbc": "T T T"}
    if structure.seed is not None:
        info["seed"] = int(structure.seed)
    return Frame([symbols[t] for t in structure.types], structure.positions.copy(), None, info)


def frame_to_structure(frame: Frame) -> Structure:
    if "Lattice" not in frame.info:
        raise DataError("structure frames need a Lattice entry")
    lattice = np.asarray(frame.info["Lattice"], dtype=float).reshape(3, 3)
    types = np.array([ord(s[0]) - ord("A") for s in frame.symbols], dtype=np.int64)
    if np.any(types < 0) or np.any(types > 25):
        raise DataError("structure species must be type letters A, B, ...")
    return Structure(frame.positions.copy(), types, np.diag(lattice).copy(),
                     str(frame.info.get("label", "")), float(frame.info.get("sigma", 0.0)))


def backmap_to_frames(data: BackmapData) -> list[Frame]:
    """Beads are written as ``CG<type>`` rows, target atoms as ``AT<label>`` rows."""
    frames = []
    for s in range(len(data)):
        symbols = [f"CG{t}" for t in data.bead_types[s]] + [f"AT{a}" for a in data.atom_labels[s]]
        pos = np.concatenate([data.coords[s], data.targets[s]])
        frames.append(Frame(symbols, pos, None, {"task": "backmap", "kind": int(data.kinds[s]),
                                                 "rotation": data.rotations[s]}))
    return frames


def frames_to_backmap(frames: Sequence[Frame]) -> BackmapData:
    coords, btypes, labels, targets, kinds, rots = [], [], [], [], [], []
    for f in frames:
        is_bead = np.array([s.startswith("CG") for s in f.symbols])
        is_atom = np.array([s.startswith("AT") for s in f.symbols])
        if not np.all(is_bead | is_atom):
            raise DataError("backmap frames may only hold CG<type> and AT<label> rows")
        coords.append(f.positions[is_bead])
        btypes.append([int(s[2:]) for s, b in zip(f.symbols, is_bead) if b])
        labels.append([int(s[2:]) for s, a in zip(f.symbols, is_atom) if a])
        targets.append(f.positions[is_atom])
        kinds.append(int(f.info.get("kind", -1)))
        rots.append(f.info.get("rotation", [1.0, 0.0, 0.0, 0.0]))
    try:
        return BackmapData(np.array(coords), np.array(btypes), np.array(labels), np.array(targets),
                           np.array(kinds), np.array(rots, dtype=float))
    except ValueError:
        raise DataError("backmap frames must share bead and atom counts") from None


def force_data_to_frames(data: ForceData) -> list[Frame]:
    frames = []
    for s in range(len(data)):
        frames.append(Frame([data.symbols[t] for t in data.types[s]], data.coords[s].copy(),
                            data.forces[s].copy(), {"energy": float(data.energies[s])}))
    return frames


def frames_to_force_data(frames: Sequence[Frame], symbols: Sequence[str] | None = None) -> ForceData:
    """Stack frames with forces; ``symbols`` fixes the type order (default: sorted)."""
    if any(f.forces is None for f in frames):
        raise DataError("every frame needs force columns")
    n = len(frames[0])
    if any(len(f) != n for f in frames):
        raise DataError("force frames must share the atom count")
    if symbols is None:
        symbols = sorted({s for f in frames for s in f.symbols})
    lookup = {s: i for i, s in enumerate(symbols)}
    try:
        types = np.array([[lookup[s] for s in f.symbols] for f in frames], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"unknown species {exc.args[0]!r}") from None
    return ForceData(
        np.array([f.positions for f in frames]),
        types,
        np.array([f.forces for f in frames]),
        np.array([float(f.info.get("energy", np.nan)) for f in frames]),
        list(symbols),
    )
