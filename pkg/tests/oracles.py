"""Independent reference implementations used only by the tests."""
import itertools

import numpy as np

# basis blades as sorted index tuples, in storage order
BLADES = [(), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]


def blade_product(x, y):
    """Product of two basis blades: returns (sign, blade) using e_i e_i = 1
    and e_i e_j = -e_j e_i."""
    factors = list(x) + list(y)
    sign = 1
    # bubble sort, counting transpositions
    for i in range(len(factors)):
        for j in range(len(factors) - 1 - i):
            if factors[j] > factors[j + 1]:
                factors[j], factors[j + 1] = factors[j + 1], factors[j]
                sign = -sign
    out = []
    for f in factors:
        if out and out[-1] == f:
            out.pop()
        else:
            out.append(f)
    return sign, tuple(out)


def brute_force_product(a, b):
    """Expand all 64 blade products of two 8-component multivectors."""
    out = np.zeros(8)
    for (i, bi), (j, bj) in itertools.product(enumerate(BLADES), repeat=2):
        sign, blade = blade_product(bi, bj)
        out[BLADES.index(blade)] += sign * a[i] * b[j]
    return out


def central_difference(fn, x, h=1e-5):
    """Gradient of scalar ``fn`` at array ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (fn(xp) - fn(xm)) / (2 * h)
    return grad


def rel_error(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# -- loop-based attention reference ------------------------------------------

_ACT = {
    "relu": lambda x: np.maximum(x, 0.0),
    "swish": lambda x: x / (1.0 + np.exp(-x)),
    "linear": lambda x: x,
}


def _mv(v):
    out = np.zeros(8)
    out[1:4] = v
    return out


def tuple_invariants(vectors):
    p = _mv(vectors[0])
    for v in vectors[1:]:
        p = brute_force_product(p, _mv(v))
    q = np.array([p[0], np.linalg.norm(p[1:4]), np.linalg.norm(p[4:7]), p[7]])
    return p, q


def _dense(P, name, x, act="linear"):
    return _ACT[act](x @ P[f"{name}/kernel"] + P[f"{name}/bias"])


def _value_mlp(P, name, q):
    h = q @ P[f"{name}/value/dense0/kernel"] + P[f"{name}/value/dense0/bias"]
    h = (h - h.mean()) / np.sqrt(h.var() + 1e-5)
    h = np.maximum(h * P[f"{name}/value/norm/gain"] + P[f"{name}/value/norm/bias"], 0.0)
    return _dense(P, f"{name}/value/dense1", h)


def loop_attention(P, name, coords, values, rank, reduce_mode, merge_kind, join_kind,
                   act="relu", mask=None, vector_out=False):
    """Explicit per-tuple evaluation of one attention layer on one cloud.

    ``P`` maps parameter names to arrays. Returns per-point outputs in
    covariant mode and one output in invariant mode.
    """
    n = len(coords)
    mask = np.ones(n, bool) if mask is None else np.asarray(mask, bool)
    tuples = list(itertools.product(range(n), repeat=rank))
    logits, outs = {}, {}
    for tup in tuples:
        p, q = tuple_invariants([coords[t] for t in tup])
        vq = _value_mlp(P, name, q)
        if merge_kind == "mean":
            merged = np.mean([values[t] for t in tup], axis=0)
        else:
            merged = sum(values[t] @ P[f"{name}/merge/W{k}"] for k, t in enumerate(tup))
        if join_kind == "mean":
            vt = (vq + merged) / 2
        else:
            vt = vq @ P[f"{name}/join/W0"] + merged @ P[f"{name}/join/W1"]
        logits[tup] = _dense(P, f"{name}/score/dense1", _dense(P, f"{name}/score/dense0", vt, act))[0]
        if vector_out:
            a = P[f"{name}/alpha"]
            vec = p[1:4] if rank % 2 else np.array([-p[6], p[5], -p[4]])
            cand = a[0] * vec + sum(a[k + 1] * coords[t] for k, t in enumerate(tup))
            scale = _dense(P, f"{name}/scale/dense1", _dense(P, f"{name}/scale/dense0", vt, act))[0]
            outs[tup] = scale * cand
        else:
            outs[tup] = vt

    def reduce(group):
        group = [t for t in group if all(mask[list(t)])]
        z = np.array([logits[t] for t in group])
        w = np.exp(z - z.max())
        w /= w.sum()
        return sum(wi * outs[t] for wi, t in zip(w, group))

    if reduce_mode == "invariant":
        return reduce(tuples)
    res = []
    for i in range(n):
        if not mask[i]:
            res.append(np.zeros_like(outs[tuples[0]]))
            continue
        res.append(reduce([t for t in tuples if t[0] == i]))
    return np.array(res)
