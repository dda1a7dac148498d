"""Indefinite linear algebra of R^4 with signature (3,1) and its bivector space.

Vectors are arrays of shape (..., 4); the fourth slot is the timelike one.
Bivectors are arrays of shape (..., 6) in the fixed ordered-pair basis
(1,2), (1,3), (1,4), (2,3), (2,4), (3,4), which every module shares.
"""

from __future__ import annotations

import numpy as np

METRIC_SIGNS = np.array([1.0, 1.0, 1.0, -1.0])

BIVECTOR_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# Induced inner product is diagonal on the pair basis with these signs,
# giving the split signature (3,3).
BIVECTOR_SIGNS = np.array([1.0, 1.0, -1.0, 1.0, -1.0, -1.0])

SPACELIKE = "spacelike"
TIMELIKE = "timelike"
LIGHTLIKE = "lightlike"
ZERO = "zero"


def inner(a, b):
    """Minkowski inner product a1*b1 + a2*b2 + a3*b3 - a4*b4."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (a * b * METRIC_SIGNS).sum(axis=-1)


def norm_sq(a):
    return inner(a, a)


def euclidean_norm(a):
    """Plain component 2-norm, used for scale-aware tolerances only."""
    return np.linalg.norm(np.asarray(a, dtype=float), axis=-1)


def causal_character(a, tol: float = 1e-12):
    """Classify a vector as spacelike, timelike, lightlike, or zero.

    The lightlike band is |<a,a>| <= tol*(1 + |a|^2) so the test is scale
    free near the cone; the zero test uses the component norm.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    a = np.asarray(a, dtype=float)
    q = inner(a, a)
    scale = 1.0 + (a * a).sum(axis=-1)
    is_zero = euclidean_norm(a) <= tol
    is_null = np.abs(q) <= tol * scale
    result = np.where(q > 0, SPACELIKE, TIMELIKE)
    result = np.where(is_null, LIGHTLIKE, result)
    result = np.where(is_zero, ZERO, result)
    if result.ndim == 0:
        return result.item()
    return result


def wedge(a, b):
    """Exterior product of two 4-vectors as a 6-component bivector."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    comps = [a[..., i] * b[..., j] - a[..., j] * b[..., i] for i, j in BIVECTOR_PAIRS]
    return np.stack(comps, axis=-1)


def inner_bivec(A, B):
    """Inner product on bivectors, the bilinear extension of the rule
    <a^b, c^d> = <a,c><b,d> - <a,d><b,c>."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return (A * B * BIVECTOR_SIGNS).sum(axis=-1)


def bivec_euclidean_norm(A):
    return np.linalg.norm(np.asarray(A, dtype=float), axis=-1)


def det4(rows):
    """Determinant of four stacked 4-vectors; rows has shape (..., 4, 4)."""
    return np.linalg.det(np.asarray(rows, dtype=float))


def gram_matrix(vectors):
    """Pairwise Minkowski Gram matrix of a sequence of (..., 4) vectors."""
    n = len(vectors)
    out = np.empty(np.broadcast(*[v[..., 0] for v in vectors]).shape + (n, n))
    for i in range(n):
        for j in range(n):
            out[..., i, j] = inner(vectors[i], vectors[j])
    return out
