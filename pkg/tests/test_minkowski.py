import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mtsurf import causal_character, inner, inner_bivec, wedge
from mtsurf.minkowski import BIVECTOR_PAIRS, BIVECTOR_SIGNS

E = np.eye(4)

vec4 = arrays(np.float64, (4,), elements=st.floats(-1, 1, allow_nan=False))


def test_inner_examples():
    assert inner(E[3], E[3]) == -1.0
    assert inner([0, 0, 1, 1], [0, 0, 1, 1]) == 0.0
    assert inner([1, 2, 3, 4], [4, 3, 2, 1]) == 12.0


def test_inner_batched():
    a = np.array([[1, 0, 0, 0], [0, 0, 0, 2.0]])
    np.testing.assert_allclose(inner(a, a), [1.0, -4.0])


def test_causal_character():
    assert causal_character([0, 0, 0, 1]) == "timelike"
    assert causal_character([0, 0, 1, 1]) == "lightlike"
    assert causal_character([1, 0, 0, 0]) == "spacelike"
    assert causal_character([0, 0, 0, 0]) == "zero"
    assert causal_character(1e-14 * np.ones(4), tol=1e-12) == "zero"
    # near-cone classification is scale free
    big = 1e8 * np.array([1.0, 0, 0, 1.0 + 1e-14])
    assert causal_character(big, tol=1e-10) == "lightlike"


def test_wedge_examples():
    np.testing.assert_array_equal(wedge(E[0], E[1]), [1, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(wedge([1, 2, 3, 4], [1, 2, 3, 4]), np.zeros(6))
    np.testing.assert_array_equal(
        wedge([1, 0, 1, 0], [0, 1, 0, 1]), [1, 0, 1, -1, 0, 1]
    )


def test_bivector_basis_signature():
    basis = [wedge(E[i], E[j]) for i, j in BIVECTOR_PAIRS]
    gram = np.array([[inner_bivec(a, b) for b in basis] for a in basis])
    np.testing.assert_allclose(gram, np.diag([1, 1, -1, 1, -1, -1]))
    np.testing.assert_allclose(np.diag(gram), BIVECTOR_SIGNS)


def test_inner_bivec_e1e4():
    assert inner_bivec(wedge(E[0], E[3]), wedge(E[0], E[3])) == -1.0


@settings(max_examples=200, deadline=None)
@given(vec4, vec4, vec4, vec4)
def test_gram_determinant_identity(a, b, c, d):
    lhs = inner_bivec(wedge(a, b), wedge(c, d))
    rhs = inner(a, c) * inner(b, d) - inner(a, d) * inner(b, c)
    assert abs(lhs - rhs) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(vec4, vec4, vec4, st.floats(-1, 1, allow_nan=False))
def test_wedge_bilinear_antisymmetric(a, b, c, s):
    np.testing.assert_allclose(wedge(a, b), -wedge(b, a), atol=1e-15)
    np.testing.assert_allclose(
        wedge(a, s * b + c), s * wedge(a, b) + wedge(a, c), atol=1e-12
    )
