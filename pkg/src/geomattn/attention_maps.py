"""Extraction of attention maps as flat, serializable records.

For every model the exported map comes from the layer that reduces tuples
into a single value per centre: the final invariant reduction of the
classifier (centre = the environment's central particle) and of the force
model (centre = each atom), and the labeled translation layer of the
backmapper (centre = each atom label). Every record therefore holds one
softmax group, and its weights sum to one before filtering.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .models import Backmapper, CrystalClassifier, ForceRegressor

__all__ = ["attention_records", "write_records"]


def _group_record(cloud, center, weights, mask, filter_below, extra):
    rank = weights.ndim
    valid = np.ones(weights.shape, bool)
    if mask is not None:
        for axis in range(rank):
            shape = [1] * rank
            shape[axis] = -1
            valid &= np.asarray(mask, bool).reshape(shape)
    keep = valid & (weights >= filter_below) if filter_below else valid
    idx = np.argwhere(keep)
    record = {
        "cloud": int(cloud),
        "center": int(center),
        "tuples": idx.tolist(),
        "weights": [float(w) for w in weights[keep]],
    }
    record.update(extra)
    return record


def attention_records(model, inputs: dict, mask=None, filter_below: float = 0.0,
                      cloud_offset: int = 0, centers=None, clouds=None) -> Iterator[dict]:
    """Yield one record per (cloud, centre) for a batch of clouds.

    Parameters
    ----------
    model : CrystalClassifier, ForceRegressor or Backmapper
    inputs : dict
        Batched model inputs, as in :func:`geomattn.audit.random_inputs`
        but with a leading cloud axis.
    mask : optional (B, N) boolean array of valid points
    filter_below : float
        Drop tuples whose weight is below this value.
    centers, clouds : optional sequences
        Classifier only: centre and cloud identifiers per batch item (for
        example the particle index of each environment and the structure
        it came from). Default to the batch index.
    """
    if isinstance(model, CrystalClassifier):
        _, w = model(inputs["bonds"], inputs["bond_values"], mask, return_attention=True)
        w = w.data
        for b in range(w.shape[0]):
            center = b if centers is None else centers[b]
            cloud = cloud_offset + b if clouds is None else clouds[b]
            m = None if mask is None else mask[b]
            yield _group_record(cloud, center, w[b], m, filter_below, {})
    elif isinstance(model, ForceRegressor):
        _, w = model.atom_energies(inputs["coords"], inputs["types"], mask, return_attention=True)
        w = w.data
        for b in range(w.shape[0]):
            for i in range(w.shape[1]):
                if mask is not None and not mask[b, i]:
                    continue
                m = None if mask is None else mask[b]
                yield _group_record(cloud_offset + b, i, w[b, i], m, filter_below, {})
    elif isinstance(model, Backmapper):
        _, w = model.translate(inputs["coords"], inputs["bead_types"], inputs["atom_labels"], mask,
                               return_attention=True)
        w = w.data
        labels = np.asarray(inputs["atom_labels"])
        for b in range(w.shape[0]):
            for a in range(w.shape[1]):
                m = None if mask is None else mask[b]
                yield _group_record(cloud_offset + b, a, w[b, a], m, filter_below,
                                    {"atom_label": int(labels[b, a] if labels.ndim > 1 else labels[a])})
    else:
        raise TypeError(f"unsupported model {type(model).__name__}")


def write_records(path, records: Iterable[dict]) -> int:
    """Write records as JSON lines; returns the number written."""
    count = 0
    with Path(path).open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
            count += 1
    return count
