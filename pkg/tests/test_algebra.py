import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geomattn.algebra import (
    InvariantVec,
    Multivector,
    Rotation,
    covariant_vector,
    geometric_product,
    invariants,
    product_chain,
    rotate,
    structure_constants,
    vector_to_multivector,
)
from oracles import brute_force_product

E1, E2, E3 = np.eye(3)
finite = st.floats(-10, 10, allow_nan=False)
mv_arrays = arrays(np.float64, 8, elements=finite)


def basis(k):
    out = np.zeros(8)
    out[k] = 1.0
    return out


def test_e1_squared_is_one():
    out = geometric_product(Multivector.vector(1, 0, 0), Multivector.vector(1, 0, 0))
    np.testing.assert_array_equal(out.components, basis(0))


def test_worked_vector_bivector_example():
    alpha, gamma, delta, zeta, mu, nu = 1.0, 2.0, 3.0, 5.0, 7.0, 11.0
    a = Multivector(v=(alpha, 0, gamma))
    b = Multivector(v=(delta, zeta, 0), b=(0, mu, nu))
    out = geometric_product(a, b)
    assert out.s == alpha * delta == 3
    assert out.v == (-gamma * mu, -gamma * nu, alpha * mu) == (-14, -22, 7)
    assert out.b == (alpha * zeta, -gamma * delta, -gamma * zeta) == (5, -6, -10)
    assert out.t == alpha * nu == 11


def test_matches_brute_force_oracle(rng):
    a = rng.uniform(-1, 1, size=(1000, 8))
    b = rng.uniform(-1, 1, size=(1000, 8))
    fast = geometric_product(a, b)
    slow = np.array([brute_force_product(x, y) for x, y in zip(a, b)])
    assert np.max(np.abs(fast - slow)) < 1e-12


def test_structure_constants_match_oracle():
    C = structure_constants()
    for i in range(8):
        for j in range(8):
            np.testing.assert_array_equal(C[i, j], brute_force_product(basis(i), basis(j)))


def test_identity_and_zero():
    m = np.arange(1.0, 9.0)
    np.testing.assert_array_equal(geometric_product(basis(0), m), m)
    np.testing.assert_array_equal(geometric_product(m, basis(0)), m)
    np.testing.assert_array_equal(geometric_product(np.zeros(8), m), np.zeros(8))


def test_associativity(rng):
    a, b, c = rng.uniform(-1, 1, size=(3, 200, 8))
    left = geometric_product(geometric_product(a, b), c)
    right = geometric_product(a, geometric_product(b, c))
    assert np.max(np.abs(left - right)) < 1e-11


@settings(max_examples=50, deadline=None)
@given(mv_arrays, mv_arrays, mv_arrays, finite)
def test_bilinearity(a, b, c, k):
    lhs = geometric_product(k * a + b, c)
    rhs = k * geometric_product(a, c) + geometric_product(b, c)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, np.abs(lhs).max()))
    lhs = geometric_product(c, a + b)
    np.testing.assert_allclose(lhs, geometric_product(c, a) + geometric_product(c, b),
                               atol=1e-12 * max(1.0, np.abs(lhs).max()))


# grade structure of products of pure grades (s, v, b, t)
GRADE_SLICES = {"s": [0], "v": [1, 2, 3], "b": [4, 5, 6], "t": [7]}
TABLE = {
    ("s", "s"): "s", ("s", "v"): "v", ("s", "b"): "b", ("s", "t"): "t",
    ("v", "s"): "v", ("v", "v"): "sb", ("v", "b"): "vt", ("v", "t"): "b",
    ("b", "s"): "b", ("b", "v"): "vt", ("b", "b"): "sb", ("b", "t"): "v",
    ("t", "s"): "t", ("t", "v"): "b", ("t", "b"): "v", ("t", "t"): "s",
}


@pytest.mark.parametrize("ga,gb", list(TABLE))
def test_grade_table(ga, gb, rng):
    for _ in range(20):
        a = np.zeros(8)
        b = np.zeros(8)
        a[GRADE_SLICES[ga]] = rng.uniform(-1, 1, len(GRADE_SLICES[ga]))
        b[GRADE_SLICES[gb]] = rng.uniform(-1, 1, len(GRADE_SLICES[gb]))
        out = geometric_product(a, b)
        allowed = [i for g in TABLE[(ga, gb)] for i in GRADE_SLICES[g]]
        forbidden = np.setdiff1d(np.arange(8), allowed)
        assert np.all(out[forbidden] == 0.0)


def test_product_chain_examples():
    v = np.array([3.0, 4.0, 0.0])
    np.testing.assert_array_equal(product_chain([v, v]), 25 * basis(0))
    np.testing.assert_array_equal(product_chain([E1, E2, E3]), basis(7))
    np.testing.assert_array_equal(product_chain([E1, E2]), basis(4))
    np.testing.assert_array_equal(product_chain([E1]), basis(1))
    with pytest.raises(ValueError):
        product_chain([])


def test_product_chain_parity(rng):
    for n in range(1, 6):
        p = product_chain(list(rng.normal(size=(n, 3))))
        zero = [1, 2, 3, 7] if n % 2 == 0 else [0, 4, 5, 6]
        assert np.all(p[zero] == 0.0)


def test_product_chain_is_left_fold_of_oracle(rng):
    vecs = rng.normal(size=(4, 3))
    expected = vector_to_multivector(vecs[0])
    for v in vecs[1:]:
        expected = brute_force_product(expected, vector_to_multivector(v))
    np.testing.assert_allclose(product_chain(list(vecs)), expected, atol=1e-12)
    np.testing.assert_allclose(product_chain(vecs), expected, atol=1e-12)


def test_invariants_examples():
    v = np.array([3.0, 4.0, 0.0])
    np.testing.assert_array_equal(invariants(product_chain([v, v])), [25, 0, 0, 0])
    np.testing.assert_array_equal(invariants(product_chain([E1, E2])), [0, 0, 1, 0])
    inv = invariants(Multivector(s=1, v=(3, 4, 0), b=(0, 0, -2), t=-5))
    assert inv == InvariantVec(1.0, 5.0, 2.0, -5.0)


def test_invariants_under_rotation(rng):
    for _ in range(100):
        m = rng.normal(size=8)
        R = Rotation.random(rng)
        np.testing.assert_allclose(invariants(rotate(m, R)), invariants(m), atol=1e-12)


def test_covariant_vector_examples():
    np.testing.assert_array_equal(covariant_vector(product_chain([E1]), "odd"), E1)
    np.testing.assert_array_equal(covariant_vector(basis(4), "even"), [0, 0, -1])
    # dual map agrees with the oracle's right product by e123
    for k in (4, 5, 6):
        expected = brute_force_product(basis(k), basis(7))[1:4]
        np.testing.assert_array_equal(covariant_vector(basis(k), "even"), expected)
    with pytest.raises(ValueError):
        covariant_vector(basis(4), "both")


def test_covariant_vector_commutes_with_rotation(rng):
    for n in (1, 2, 3, 4):
        for _ in range(25):
            vecs = rng.normal(size=(n, 3))
            R = Rotation.random(rng)
            parity = "odd" if n % 2 else "even"
            m = product_chain(list(vecs))
            lhs = covariant_vector(rotate(m, R), parity)
            rhs = R.as_matrix() @ covariant_vector(m, parity)
            np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_rotate_examples():
    m = np.arange(8.0)
    np.testing.assert_allclose(rotate(m, Rotation.identity()), m, atol=0)
    R = Rotation.from_axis_angle([0, 0, 1], np.pi / 2)
    np.testing.assert_allclose(rotate(basis(1), R), basis(2), atol=1e-12)
    np.testing.assert_allclose(R.apply(E1), E2, atol=1e-12)


def test_rotate_matches_rotating_factors(rng):
    for _ in range(100):
        a, b = rng.normal(size=(2, 3))
        R = Rotation.random(rng)
        lhs = rotate(product_chain([a, b]), R)
        rhs = product_chain([R.apply(a), R.apply(b)])
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
        assert lhs[0] == pytest.approx(product_chain([a, b])[0], abs=1e-12)


def test_rotation_representations(rng):
    for _ in range(50):
        R = Rotation.random(rng)
        M = R.as_matrix()
        assert abs(np.linalg.det(M) - 1) < 1e-12
        np.testing.assert_allclose(M @ M.T, np.eye(3), atol=1e-12)
        back = Rotation.from_matrix(M).as_matrix()
        np.testing.assert_allclose(back, M, atol=1e-12)
        np.testing.assert_allclose(R.inverse().as_matrix(), M.T, atol=1e-12)


def test_rotation_rejects_bad_input():
    with pytest.raises(ValueError):
        Rotation((1.0, 0.1, 0.0, 0.0))
    with pytest.raises(ValueError):
        Rotation.from_matrix(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(TypeError):
        rotate(np.zeros(8), np.eye(3))


def test_multivector_value_semantics():
    a = Multivector(1, (1, 2, 3), (4, 5, 6), 7)
    assert (a + Multivector()) == a
    assert (a - a) == Multivector()
    assert (-a).s == -1
    assert (2 * a).t == 14
    np.testing.assert_array_equal(Multivector.from_array(a.components).components, a.components)
    with pytest.raises(ValueError):
        Multivector(s=np.nan)
    with pytest.raises(ValueError):
        Multivector.from_array(np.zeros(7))
