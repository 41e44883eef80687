"""Multivectors, geometric products and rotation invariants in 3D."""
import numpy as np

from geomattn.algebra import Multivector, Rotation, covariant_vector, invariants, product_chain, rotate

# Multivectors store (scalar, e1, e2, e3, e12, e13, e23, e123).
a = Multivector.vector(1.0, 0.0, 2.0)
b = Multivector(v=(3.0, 5.0, 0.0), b=(0.0, 7.0, 11.0))
print("a b =", a * b)

# The product of two vectors is their dot product plus their wedge.
u, w = np.array([1.0, 2.0, 0.5]), np.array([-0.5, 1.0, 3.0])
p = product_chain([u, w])
print("scalar part", p[0], "== dot", u @ w)
print("bivector part", p[4:7])

# Four numbers survive any rotation: scalar, |vector|, |bivector|, trivector.
rng = np.random.default_rng(0)
R = Rotation.random(rng)
p3 = product_chain([u, w, np.array([0.2, -1.0, 0.7])])
print("invariants before", invariants(p3))
print("invariants after ", invariants(rotate(p3, R)))

# A vector can be read off any product; it turns with the inputs.
# Odd-length products keep their vector part, even-length ones use the
# dual of the bivector part.
v_before = covariant_vector(p, "even")
v_after = covariant_vector(product_chain([R.apply(u), R.apply(w)]), "even")
print("R v(p) =", R.apply(v_before))
print("v(R p) =", v_after)

# Rotations: quarter turn about e3 sends e1 to e2.
quarter = Rotation.from_axis_angle([0, 0, 1], np.pi / 2)
print("e1 ->", np.round(quarter.apply([1.0, 0.0, 0.0]), 12))
