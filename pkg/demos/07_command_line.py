"""The command-line workflow, driven from Python.

The two structures share the bcc geometry and differ only in particle
types, so a small model separates them within a few epochs.

The same steps from a shell::

    geomattn gen-data --prototype cI2-W,cP2-CsCl --sigma 0.001 --out data/s.xyz
    geomattn train --task crystal --config cfg.json --out run
    geomattn eval --model run --data data/s.xyz
    geomattn audit-equivariance --model run
    geomattn export-attention --model run --data data/s.xyz --out att.jsonl --filter-below 0.01
"""
import json
import tempfile
from pathlib import Path

from geomattn.cli import main

work = Path(tempfile.mkdtemp())
config = {
    "model": {"working_dim": 16, "hidden_dim": 32, "dropout": 0.0},
    "train": {"max_epochs": 8, "batch_size": 16, "learning_rate": 0.003, "seed": 0},
    "data": {"prototypes": ["cI2-W", "cP2-CsCl"], "sigmas": [1e-3], "per_class": 200, "seed": 0},
}
(work / "cfg.json").write_text(json.dumps(config))

main(["gen-data", "--prototype", "cI2-W,cP2-CsCl", "--sigma", "0.001", "--min-particles", "256",
      "--out", str(work / "s.xyz")])
main(["train", "--task", "crystal", "--config", str(work / "cfg.json"), "--out", str(work / "run")])
print((work / "run" / "metrics.jsonl").read_text())
main(["eval", "--model", str(work / "run"), "--data", str(work / "s.xyz")])
code = main(["audit-equivariance", "--model", str(work / "run"), "--rotations", "10"])
print("audit exit code", code)
main(["export-attention", "--model", str(work / "run"), "--data", str(work / "s.xyz"),
      "--out", str(work / "att.jsonl"), "--filter-below", "0.01", "--max-centers", "20"])
first = json.loads((work / "att.jsonl").read_text().splitlines()[0])
print("first record:", first["cloud"], first["center"], len(first["tuples"]), "pairs kept")
