"""Reverse-mode gradients, and gradients of gradients, with nested tapes."""
import numpy as np

import geomattn.tensor as T
from geomattn.tensor import Tape, Tensor

x = Tensor(np.array([1.0, -2.0, 0.5]))

# A tape records the operations on watched tensors.
with Tape() as tape:
    tape.watch(x)
    y = T.tensor_sum(T.sigmoid(x) * x)
(dy,) = tape.gradient(y, [x])
print("dy/dx =", dy.data)

# Tapes are consumed by a backward pass unless they are persistent.
try:
    tape.gradient(y, [x])
except RuntimeError as exc:
    print("second call:", exc)

# An outer tape records the inner backward pass. Force fields use this to
# train on forces, which are themselves derivatives of an energy.
W = Tensor(np.array([[0.3, -0.1], [0.2, 0.4], [-0.5, 0.1]]), requires_grad=True)
r = Tensor(np.array([[0.1, 0.2, 0.3]]))
with Tape() as outer:
    with Tape() as inner:
        inner.watch(r)
        energy = T.tensor_sum(T.sigmoid(r @ W) ** 2)
    (grad_r,) = inner.gradient(energy, [r])
    loss = T.tensor_sum(grad_r * grad_r)
print("d loss / dW =\n", outer.backward(loss)[W].data)

# Gradients at the origin of a norm are defined as zero.
z = Tensor(np.zeros((1, 3)))
with Tape() as tape:
    tape.watch(z)
    n = T.safe_norm(z)
print("norm gradient at 0:", tape.gradient(n, [z])[0].data)
