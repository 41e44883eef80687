import json

import numpy as np
import pytest

from geomattn import datasets as D
from geomattn.cli import EXIT_AUDIT, EXIT_CONFIG, EXIT_DATA, main
from geomattn.models import load_model

TINY = {"working_dim": 8, "hidden_dim": 16, "n_blocks": 1}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture
def crystal_run(tmp_path):
    cfg = write(tmp_path / "cfg.json", {
        "model": {**TINY, "dropout": 0.0},
        "train": {"max_epochs": 2, "batch_size": 16},
        "data": {"prototypes": ["cF4-Cu", "cP2-CsCl"], "sigmas": [0.001], "per_class": 20, "min_particles": 64},
    })
    out = tmp_path / "run"
    assert main(["train", "--task", "crystal", "--config", str(cfg), "--out", str(out)]) == 0
    return out


def test_train_writes_outputs(crystal_run):
    lines = (crystal_run / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0])["epoch"] == 1
    summary = json.loads((crystal_run / "summary.json").read_text())
    assert summary["sizes"] == {"train": 32, "val": 4, "test": 4}
    model, meta = load_model(crystal_run / "model")
    assert meta["class_names"] == ["cF4-Cu", "cP2-CsCl"]
    assert model.spec.num_types == 2


def test_gen_eval_export(crystal_run, tmp_path, capsys):
    data = tmp_path / "s.xyz"
    assert main(["gen-data", "--prototype", "cF4-Cu,cP2-CsCl", "--sigma", "0.001",
                 "--min-particles", "32", "--seed", "3", "--out", str(data)]) == 0
    manifest = json.loads((tmp_path / "s.xyz.manifest.json").read_text())
    assert manifest["prototypes"] == ["cF4-Cu", "cP2-CsCl"]
    assert manifest["counts"] == {"cF4-Cu@0.001": 32, "cP2-CsCl@0.001": 54}
    capsys.readouterr()
    assert main(["eval", "--model", str(crystal_run), "--data", str(data)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["n"] == 86 and 0 <= metrics["accuracy"] <= 1

    out = tmp_path / "att.jsonl"
    assert main(["export-attention", "--model", str(crystal_run), "--data", str(data), "--out", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    # one record per particle of each structure, each over all 12 x 12 pairs
    assert len(records) == 86
    assert sum(r["cloud"] == 0 for r in records) == 32
    assert all(len(r["tuples"]) == 144 for r in records)
    for r in records:
        w = np.array(r["weights"])
        assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-12

    filtered = tmp_path / "att_f.jsonl"
    assert main(["export-attention", "--model", str(crystal_run), "--data", str(data),
                 "--out", str(filtered), "--filter-below", "0.01"]) == 0
    for full, part in zip(records, (json.loads(x) for x in filtered.read_text().splitlines())):
        kept = [w for w in full["weights"] if w >= 0.01]
        assert part["weights"] == kept


def test_audit_untrained_passes(crystal_run, capsys):
    assert main(["audit-equivariance", "--model", str(crystal_run / "model"),
                 "--rotations", "5", "--permutations", "5"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True


def test_audit_failure_exit_code(crystal_run, monkeypatch):
    # saved weights cannot break the symmetry, so stub the report
    import geomattn.cli as cli

    monkeypatch.setattr(cli, "audit_model", lambda *a, **k: {"checks": {}, "passed": False})
    assert main(["audit-equivariance", "--model", str(crystal_run)]) == EXIT_AUDIT


@pytest.mark.parametrize("kind", ["force", "backmap"])
def test_force_and_backmap_pipeline(kind, tmp_path, capsys):
    data = tmp_path / f"{kind}.xyz"
    assert main(["gen-data", "--kind", kind, "--count", "10", "--out", str(data)]) == 0
    cfg = write(tmp_path / "cfg.json", {
        "model": {**TINY, **({"refine_blocks": 1} if kind == "backmap" else {})},
        "train": {"max_epochs": 1, "batch_size": 5},
        "data": {"file": str(data)},
        "split": {"memorize": True},
    })
    out = tmp_path / "run"
    assert main(["train", "--task", kind, "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["eval", "--model", str(out), "--data", str(data)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["n"] == 10
    att = tmp_path / "att.jsonl"
    assert main(["export-attention", "--model", str(out), "--data", str(data), "--out", str(att)]) == 0
    records = [json.loads(x) for x in att.read_text().splitlines()]
    per_cloud = 5 if kind == "force" else 4
    assert len(records) == 10 * per_cloud
    assert all(abs(sum(r["weights"]) - 1) < 1e-12 for r in records)
    assert main(["audit-equivariance", "--model", str(out), "--rotations", "3", "--permutations", "3",
                 "--clouds", "1"]) == 0


def test_config_errors(tmp_path):
    out = str(tmp_path / "o")
    assert main(["train", "--task", "crystal", "--config", str(tmp_path / "missing.json"), "--out", out]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["train", "--task", "crystal", "--config", str(bad), "--out", out]) == EXIT_CONFIG
    cfg = write(tmp_path / "c.json", {"train": {"plateau_factor": 2.0}})
    assert main(["train", "--task", "force", "--config", str(cfg), "--out", out]) == EXIT_CONFIG
    cfg = write(tmp_path / "c2.json", {"optimizer": {}})
    assert main(["train", "--task", "force", "--config", str(cfg), "--out", out]) == EXIT_CONFIG
    assert main(["gen-data", "--prototype", "cF4-Al", "--out", str(tmp_path / "x.xyz")]) == EXIT_CONFIG
    assert main(["eval", "--model", str(tmp_path), "--data", str(bad)]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["train", "--task", "segment", "--config", str(cfg), "--out", out])
    assert exc.value.code == EXIT_CONFIG


def test_data_errors(crystal_run, tmp_path):
    bad = tmp_path / "bad.xyz"
    bad.write_text("2\nenergy=1\nH 0 0 0\n")
    assert main(["eval", "--model", str(crystal_run), "--data", str(bad)]) == EXIT_DATA
    assert main(["eval", "--model", str(crystal_run), "--data", str(tmp_path / "none.xyz")]) == EXIT_DATA
    cfg = write(tmp_path / "cfg.json", {"data": {"file": str(bad)}})
    assert main(["train", "--task", "force", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_DATA
