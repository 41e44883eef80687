"""Command-line front end: ``geomattn {train,eval,audit-equivariance,export-attention,gen-data}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 audit failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import datasets as D
from . import training as TR
from .attention_maps import attention_records, write_records
from .audit import audit_model
from .models import ModelSpec, bond_type_values, build_model, load_model, save_model

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_AUDIT = 4

TASKS = {"crystal": "classify", "force": "force", "backmap": "backmap"}
CRYSTAL_DEFAULT = ["cF4-Cu", "cI2-W", "hP2-Mg", "cP2-CsCl"]

log = logging.getLogger("geomattn")


class ConfigError(ValueError):
    pass


# -- data loading ---------------------------------------------------------------


def _environments_from_frames(frames, class_names, k=12, max_centers=None, seed=0):
    """Environments of every structure frame; labels come from the frame's ``label``."""
    rng = np.random.default_rng(seed)
    parts = []
    centers_out = []
    for frame in frames:
        s = D.frame_to_structure(frame)
        if s.label not in class_names:
            raise D.DataError(f"structure label {s.label!r} is not one of {class_names}")
        centers = np.arange(len(s))
        if max_centers is not None and max_centers < len(s):
            centers = np.sort(rng.choice(len(s), size=max_centers, replace=False))
        parts.append(D.extract_environments(s, k, centers, class_names.index(s.label), class_names))
        centers_out.append(centers)
    return D.EnvironmentSet.concat(parts), centers_out


def _load_frames(path):
    path = Path(path)
    if not path.exists():
        raise D.DataError(f"data file {path} does not exist")
    return D.read_xyz(path)


def _crystal_data(cfg: dict):
    names = list(cfg.get("prototypes", CRYSTAL_DEFAULT))
    if "file" in cfg:
        envs, _ = _environments_from_frames(_load_frames(cfg["file"]), names,
                                            max_centers=cfg.get("per_structure"), seed=cfg.get("seed", 0))
        return envs
    return D.make_environment_dataset(names, cfg.get("sigmas", [1e-3]), int(cfg.get("per_class", 500)),
                                      seed=int(cfg.get("seed", 0)),
                                      min_particles=int(cfg.get("min_particles", 2048)))


def _force_data(cfg: dict, symbols=None):
    if "file" in cfg:
        return D.frames_to_force_data(_load_frames(cfg["file"]), symbols or cfg.get("symbols"))
    return D.make_force_dataset(int(cfg.get("n_frames", 200)), seed=int(cfg.get("seed", 0)),
                                n_atoms=int(cfg.get("n_atoms", 5)))


def _backmap_data(cfg: dict):
    if "file" in cfg:
        return D.frames_to_backmap(_load_frames(cfg["file"]))
    return D.make_backmap_dataset(int(cfg.get("n_samples", 200)), seed=int(cfg.get("seed", 0)))


def _read_config(path) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - {"model", "train", "data", "split"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return cfg


# -- commands -------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _read_config(args.config)
    task = TASKS[args.task]
    data_cfg = cfg.get("data", {})
    try:
        train_cfg = TR.TrainConfig.from_dict({
            "loss": {"classify": "cross_entropy", "force": "force_mse", "backmap": "coordinate_mse"}[task],
            **cfg.get("train", {}),
        })
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train section: {exc}") from None

    meta = {"task": args.task}
    if task == "classify":
        data = _crystal_data(data_cfg)
        meta["class_names"] = data.class_names
        overrides = {"num_classes": len(data.class_names),
                     "num_types": int(max(data.center_types.max(), data.neighbor_types.max())) + 1}
        labels = data.labels
    elif task == "force":
        data = _force_data(data_cfg)
        meta["symbols"] = data.symbols
        overrides = {"num_types": len(data.symbols)}
        labels = np.zeros(len(data), dtype=int)
    else:
        data = _backmap_data(data_cfg)
        overrides = {"num_types": int(data.bead_types.max()) + 1,
                     "num_atom_labels": int(data.atom_labels.max()) + 1}
        labels = data.kinds
    overrides["dtype"] = train_cfg.precision
    overrides.update(cfg.get("model", {}))
    try:
        spec = ModelSpec.defaults(task, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model section: {exc}") from None

    split = cfg.get("split", {})
    fractions = split.get("fractions", [0.8, 0.1, 0.1])
    if split.get("memorize", False):
        # train, validate and test on the same samples
        tr = va = te = np.arange(len(data))
    else:
        tr, va, te = D.split_indices(labels, fractions, seed=int(split.get("seed", 0)))
        if len(tr) == 0 or len(va) == 0:
            raise ConfigError("split leaves an empty training or validation set")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(
        {**cfg, "train": train_cfg.to_dict(), "model": spec.to_dict()}, indent=2))
    model = build_model(spec)
    metrics_path = out / "metrics.jsonl"
    metrics_path.write_text("")

    def on_epoch(record):
        with metrics_path.open("a") as fh:
            fh.write(json.dumps(record) + "\n")

    started = time.perf_counter()
    trainer = {"classify": TR.train_classifier, "force": TR.train_force, "backmap": TR.train_backmap}[task]
    evaluator = {"classify": TR.evaluate_classifier, "force": TR.evaluate_force,
                 "backmap": TR.evaluate_backmap}[task]
    history = trainer(model, data.subset(tr), data.subset(va), train_cfg, on_epoch)
    elapsed = time.perf_counter() - started
    save_model(model, out / "model", extra=meta)
    summary = {
        "task": args.task,
        "epochs": len(history),
        "parameters": model.parameter_count(),
        "train_seconds": elapsed,
        "sizes": {"train": len(tr), "val": len(va), "test": len(te)},
        "test": evaluator(model, data.subset(te)) if len(te) else {},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return 0


def _load(directory):
    directory = Path(directory)
    if not (directory / "spec.json").exists():
        # accept the training output directory as well as the model directory
        if (directory / "model" / "spec.json").exists():
            directory = directory / "model"
        else:
            raise ConfigError(f"no saved model in {directory}")
    return load_model(directory)


def _model_inputs(model, meta, frames, max_centers=None):
    """Batched inputs, a mask and per-record centre ids for data frames."""
    task = model.spec.task
    if task == "classify":
        envs, centers = _environments_from_frames(frames, meta["class_names"], max_centers=max_centers)
        values = bond_type_values(envs.center_types, envs.neighbor_types, model.spec.num_types)
        clouds = np.concatenate([np.full(len(c), f) for f, c in enumerate(centers)])
        return envs, {"bonds": envs.bonds, "bond_values": values}, (np.concatenate(centers), clouds)
    if task == "force":
        data = D.frames_to_force_data(frames, meta.get("symbols"))
        return data, {"coords": data.coords, "types": data.types}, None
    data = D.frames_to_backmap(frames)
    return data, {"coords": data.coords, "bead_types": data.bead_types, "atom_labels": data.atom_labels}, None


def cmd_eval(args) -> int:
    model, meta = _load(args.model)
    frames = _load_frames(args.data)
    data, _, _ = _model_inputs(model, meta, frames, args.max_centers)
    metrics = {"classify": TR.evaluate_classifier, "force": TR.evaluate_force,
               "backmap": TR.evaluate_backmap}[model.spec.task](model, data)
    print(json.dumps(metrics))
    return 0


def cmd_audit(args) -> int:
    model, _ = _load(args.model)
    report = audit_model(model, args.rotations, args.permutations, args.clouds, args.seed)
    print(json.dumps(report, indent=2))
    return 0 if report["passed"] else EXIT_AUDIT


def cmd_export(args) -> int:
    model, meta = _load(args.model)
    frames = _load_frames(args.data)
    _, inputs, centers = _model_inputs(model, meta, frames, args.max_centers)
    n = len(next(iter(inputs.values())))
    batch = 256

    def records():
        for start in range(0, n, batch):
            part = {k: v[start:start + batch] for k, v in inputs.items()}
            ids = {}
            if centers is not None:
                ids = {"centers": centers[0][start:start + batch], "clouds": centers[1][start:start + batch]}
            yield from attention_records(model, part, filter_below=args.filter_below,
                                         cloud_offset=start, **ids)

    count = write_records(args.out, records())
    print(json.dumps({"records": count, "out": str(args.out)}))
    return 0


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest = {"kind": args.kind, "seed": args.seed, "file": out.name}
    if args.kind == "crystal":
        if not args.prototype:
            raise ConfigError("gen-data --kind crystal needs --prototype")
        names = [p for p in args.prototype.split(",") if p]
        sigmas = args.sigma or [0.0]
        frames, counts = [], {}
        for i, name in enumerate(names):
            if name not in D.PROTOTYPES:
                raise ConfigError(f"unknown prototype {name!r}; choose from {sorted(D.PROTOTYPES)}")
            for j, sigma in enumerate(sigmas):
                s = D.generate_structure(name, sigma, args.min_particles, seed=args.seed + 1000 * i + j)
                frames.append(D.structure_to_frame(s))
                counts[f"{name}@{sigma:g}"] = len(s)
        manifest.update(prototypes=names, sigmas=sigmas, counts=counts)
    elif args.kind == "force":
        data = D.make_force_dataset(args.count, seed=args.seed)
        frames = D.force_data_to_frames(data)
        manifest.update(frames=len(frames), atoms=int(data.coords.shape[1]), symbols=data.symbols,
                        sigma=0.08, potential="morse")
    else:
        data = D.make_backmap_dataset(args.count, seed=args.seed)
        frames = D.backmap_to_frames(data)
        manifest.update(samples=len(frames), beads=int(data.coords.shape[1]), atoms=int(data.targets.shape[1]))
    D.write_xyz(out, frames)
    manifest_path = out.with_name(out.name + ".manifest.json")
    D.write_manifest(manifest_path, **manifest)
    print(json.dumps({"out": str(out), "manifest": str(manifest_path), "frames": len(frames)}))
    return 0


# -- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geomattn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--task", choices=sorted(TASKS), required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on an extended-XYZ file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--max-centers", type=int, default=None,
                   help="classifier only: environments sampled per structure frame")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("audit-equivariance", help="check rotation, permutation and gradient properties")
    p.add_argument("--model", required=True)
    p.add_argument("--rotations", type=int, default=20)
    p.add_argument("--permutations", type=int, default=20)
    p.add_argument("--clouds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("export-attention", help="write attention maps as JSON lines")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--filter-below", type=float, default=0.0)
    p.add_argument("--max-centers", type=int, default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset file and manifest")
    p.add_argument("--kind", choices=["crystal", "force", "backmap"], default="crystal")
    p.add_argument("--prototype", help="comma-separated prototype names")
    p.add_argument("--sigma", type=float, action="append", help="noise level; repeat for several")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=200, help="frames or samples for force/backmap kinds")
    p.add_argument("--min-particles", type=int, default=2048)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except D.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
