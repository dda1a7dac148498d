import dataclasses

import numpy as np
import pytest

from mtsurf import (
    build_invariant_field,
    derivative_formula_residuals,
    eval_jet,
    eval_jet_grid,
    frame_constraint_residuals,
    geometric_frame,
    inner,
    integrability_residuals,
    intrinsic_gauss_curvature,
    invariants_at,
    normal_connection_curvature,
    parse_surface,
    principal_directions,
)
from mtsurf.dsl import Bin, Call, Neg, Num, SurfaceDef, Var
from mtsurf.errors import FlatPointError, NotMarginallyTrappedError, UmbilicalError
from mtsurf.frame import dual_null_normal, interior_grid, _frames_masked
from mtsurf.shape import FirstForm, SecondForm, orthonormal_normals


def _second_form(L, M, N):
    zeros = np.zeros(3)
    return SecondForm(c1=zeros, c2=zeros, L=L, M=M, N=N)


def test_principal_directions_diagonal_case():
    first = FirstForm(E=2.0, F=0.0, G=3.0, W=np.sqrt(6.0))
    d1, d2 = principal_directions(first, _second_form(L=1.0, M=0.0, N=5.0))
    # I-unit directions along z_u and z_v, larger z_u coefficient first
    np.testing.assert_allclose(d1, [1 / np.sqrt(2), 0], atol=1e-15)
    np.testing.assert_allclose(d2, [0, 1 / np.sqrt(3)], atol=1e-15)


def test_principal_directions_flat_and_umbilic():
    first = FirstForm(E=1.0, F=0.0, G=1.0, W=1.0)
    with pytest.raises(FlatPointError):
        principal_directions(first, _second_form(0.0, 0.0, 0.0))
    # proportional forms annihilate the quadratic identically
    with pytest.raises(FlatPointError):
        principal_directions(first, _second_form(2.0, 0.0, 2.0))
    # nearly proportional forms survive the flat test but fail on the
    # discriminant: a coincident-root configuration
    with pytest.raises(UmbilicalError):
        principal_directions(first, _second_form(1.0, 1e-9, 1.0), tol=1e-15)


def test_principal_directions_conjugacy(mt_screw):
    surface, _ = mt_screw
    us, vs = interior_grid(surface, 5, 5)
    field = build_invariant_field(surface, us=us, vs=vs, tol=1e-6)
    jet = eval_jet_grid(surface, us, vs, 2)
    from mtsurf import first_fundamental, second_fundamental

    first = first_fundamental(jet, tol=1e-6)
    sec = second_fundamental(jet, tol=1e-6)
    d1, d2 = field.x_coeffs, field.y_coeffs
    i_mixed = (first.E * d1[:, 0] * d2[:, 0]
               + first.F * (d1[:, 0] * d2[:, 1] + d1[:, 1] * d2[:, 0])
               + first.G * d1[:, 1] * d2[:, 1])
    ii_mixed = (sec.L * d1[:, 0] * d2[:, 0]
                + sec.M * (d1[:, 0] * d2[:, 1] + d1[:, 1] * d2[:, 0])
                + sec.N * d1[:, 1] * d2[:, 1])
    assert np.abs(i_mixed).max() <= 1e-10
    assert np.abs(ii_mixed).max() <= 1e-10
    # discriminant of the direction quadratic is positive on the grid
    A = first.E * sec.M - first.F * sec.L
    B = first.E * sec.N - first.G * sec.L
    C = first.F * sec.N - first.G * sec.M
    assert np.all(B * B - 4 * A * C > 0)


def test_frame_constraints_on_fixtures(mt_rotational, mt_screw, mt_cylinder):
    surfaces = [mt_rotational[0], mt_screw[0], mt_cylinder]
    for surface in surfaces:
        us, vs = interior_grid(surface, 5, 5)
        frame = geometric_frame(eval_jet_grid(surface, us, vs, 3), tol=1e-6)
        res = frame_constraint_residuals(frame)
        worst = max(np.abs(v).max() for k, v in res.items() if k != "orientation_det")
        assert worst <= 1e-10
        assert np.all(res["orientation_det"] > 0)


def test_frame_refusals(plane, lightlike_graph, light_cone_slice):
    with pytest.raises(FlatPointError):
        geometric_frame(eval_jet(lightlike_graph, 0.3, 0.2, 3))
    with pytest.raises((FlatPointError, NotMarginallyTrappedError)):
        geometric_frame(eval_jet(plane, 0.5, 0.5, 3))
    with pytest.raises((FlatPointError, NotMarginallyTrappedError)):
        geometric_frame(eval_jet(light_cone_slice, 0.7, 1.0, 3))


def test_dual_null_normal_unique(mt_rotational):
    surface, _ = mt_rotational
    us, vs = interior_grid(surface, 4, 4)
    jet = eval_jet_grid(surface, us, vs, 3)
    from mtsurf import mean_curvature

    H = mean_curvature(jet, tol=1e-6)
    n1h, n2h = orthonormal_normals(jet, tol=1e-6)
    n2, branch, _, _ = dual_null_normal(H, n1h, n2h)
    # defining conditions
    assert np.abs(inner(n2, n2)).max() <= 1e-12
    assert np.abs(inner(n2, H) + 1).max() <= 1e-12
    # independent reconstruction: n2 = alpha*n1hat + beta*n2hat solves the
    # 2x2 linear system <n2, H> = -1, <n2, ell> = 0 with ell the null ray
    # n2 itself lies on (the one opposite to H)
    ell = np.where(branch[:, None], (n1h - n2h), (n1h + n2h))
    for k in range(us.size):
        A = np.array([
            [inner(n1h[k], H[k]), inner(n2h[k], H[k])],
            [inner(n1h[k], ell[k]), inner(n2h[k], ell[k])],
        ])
        alpha, beta = np.linalg.solve(A, [-1.0, 0.0])
        n2_lin = alpha * n1h[k] + beta * n2h[k]
        np.testing.assert_allclose(n2_lin, n2[k], atol=1e-12)


def _swap_uv(expr):
    if isinstance(expr, Num):
        return expr
    if isinstance(expr, Var):
        return Var({"u": "v", "v": "u"}.get(expr.name, expr.name))
    if isinstance(expr, Neg):
        return Neg(_swap_uv(expr.arg))
    if isinstance(expr, Call):
        return Call(expr.fn, _swap_uv(expr.arg))
    return Bin(expr.op, _swap_uv(expr.lhs), _swap_uv(expr.rhs))


def test_ordering_independent_quantities(mt_screw):
    """Transposing the parametrization swaps z_u and z_v, hence potentially
    the principal ordering; K, kappa and beta1^2+beta2^2 must not care."""
    surface, _ = mt_screw
    swapped = SurfaceDef(
        components=tuple(_swap_uv(c) for c in surface.components),
        domain=(surface.domain[1], surface.domain[0]),
        params=surface.params,
    )
    us, vs = interior_grid(surface, 4, 4)
    f1 = build_invariant_field(surface, us=us, vs=vs, tol=1e-6)
    f2 = build_invariant_field(swapped, us=vs, vs=us, tol=1e-6)
    np.testing.assert_allclose(f1.gauss_curvature, f2.gauss_curvature, atol=1e-9)
    np.testing.assert_allclose(f1.normal_curvature, f2.normal_curvature, atol=1e-9)
    np.testing.assert_allclose(
        f1.beta1**2 + f1.beta2**2, f2.beta1**2 + f2.beta2**2, atol=1e-9
    )


def test_reparametrization_leaves_frame(mt_cylinder):
    base = mt_cylinder
    scaled = parse_surface(
        "(cos(2*v), sin(2*v), sinh(2*u), cosh(2*u)) on [-0.5,0.5]x[0,3.14]"
    )
    u, v = 0.21, 0.83
    g1 = geometric_frame(eval_jet(base, 2 * u, 2 * v, 3))
    g2 = geometric_frame(eval_jet(scaled, u, v, 3))
    np.testing.assert_allclose(g1.n1, g2.n1, atol=1e-12)
    np.testing.assert_allclose(g1.n2, g2.n2, atol=1e-12)
    # tangent pair agrees up to an orientation-preserving sign/swap
    dots = sorted([abs(float(inner(g1.x, g2.x))), abs(float(inner(g1.y, g2.y))),
                   abs(float(inner(g1.x, g2.y))), abs(float(inner(g1.y, g2.x)))])
    np.testing.assert_allclose(dots[2:], 1.0, atol=1e-12)
    np.testing.assert_allclose(dots[:2], dots[:2][::-1], atol=1e-12)


def test_invariants_at_matches_field(mt_rotational):
    surface, _ = mt_rotational
    us, vs = interior_grid(surface, 3, 3)
    field = build_invariant_field(surface, us=us, vs=vs, tol=1e-6)
    # point 0 is the alignment sweep's root, so its frame is untransformed
    # and must agree with the standalone single-point construction
    inv = invariants_at(surface, us[0], vs[0], tol=1e-6)
    assert inv.lam == pytest.approx(field.lam[0], abs=1e-12)
    assert inv.gamma1 == pytest.approx(field.gamma1[0], abs=1e-10)
    assert inv.gauss_curvature == pytest.approx(2 * inv.lam * inv.mu)
    assert inv.normal_curvature == pytest.approx(-2 * inv.mu * inv.nu)
    # transform-invariant combinations agree at every grid point
    for k in (3, 7):
        inv_k = invariants_at(surface, us[k], vs[k], tol=1e-6)
        assert inv_k.gauss_curvature == pytest.approx(field.gauss_curvature[k], abs=1e-10)
        assert inv_k.normal_curvature == pytest.approx(field.normal_curvature[k], abs=1e-10)
        assert inv_k.beta1**2 + inv_k.beta2**2 == pytest.approx(
            field.beta1[k] ** 2 + field.beta2[k] ** 2, abs=1e-10
        )


def test_curvature_identities(mt_screw):
    surface, _ = mt_screw
    field = build_invariant_field(surface, grid=(9, 9), tol=1e-6)
    ok = field.valid
    K_intr = intrinsic_gauss_curvature(surface, field.us, field.vs)
    rel = np.abs(field.gauss_curvature - K_intr) / (1 + np.abs(K_intr))
    assert rel[ok].max() <= 1e-6
    kap_fd = normal_connection_curvature(surface, field.us, field.vs)
    rel_k = np.abs(field.normal_curvature - kap_fd) / (1 + np.abs(kap_fd))
    assert rel_k[ok].max() <= 1e-5
    # the screw surface genuinely curves the normal bundle
    assert np.abs(field.normal_curvature[ok]).min() > 1e-3


def test_derivative_formulas_and_convergence(mt_rotational):
    surface, _ = mt_rotational
    f1 = build_invariant_field(surface, grid=(5, 5), h=1e-3, tol=1e-6)
    f2 = build_invariant_field(surface, grid=(5, 5), h=5e-4, tol=1e-6)
    r1 = derivative_formula_residuals(f1)
    r2 = derivative_formula_residuals(f2)
    assert r1.worst() <= 1e-4
    ratio = r1.worst() / r2.worst()
    assert 3.0 <= ratio <= 5.0
    assert set(r1.names) == {
        "x_x", "x_y", "y_x", "y_y", "x_n1", "y_n1", "x_n2", "y_n2",
    }


def test_integrability_residuals_and_sensitivity(mt_screw):
    surface, _ = mt_screw
    field = build_invariant_field(surface, grid=(9, 9), tol=1e-6)
    clean = integrability_residuals(field)
    assert clean.worst() <= 1e-4
    corrupted = integrability_residuals(field, mu_factor=1.1)
    assert corrupted.worst() > 1e-2


def test_parallel_fixture_invariants(parallel_h):
    surface, cert = parallel_h
    field = build_invariant_field(surface, grid=(9, 9), tol=1e-6)
    ok = field.valid
    assert np.abs(field.beta1[ok]).max() <= 1e-6
    assert np.abs(field.beta2[ok]).max() <= 1e-6
    assert np.abs(field.nu[ok]).max() <= 1e-6
    assert cert.parallel_H


def test_field_poisoning(lightlike_graph):
    field = build_invariant_field(lightlike_graph, grid=(4, 4))
    assert field.n_poisoned == 16
    assert field.poison_summary() == {"flat_point": 16}
    with pytest.raises(FlatPointError):
        invariants_at(lightlike_graph, 0.1, 0.1)


def test_alignment_continuity(mt_screw):
    surface, _ = mt_screw
    field = build_invariant_field(surface, grid=(7, 7), tol=1e-6)
    nu_g, nv_g = field.grid_shape
    x = field.x.reshape(nu_g, nv_g, 4)
    y = field.y.reshape(nu_g, nv_g, 4)
    assert np.all(inner(x[:, 1:], x[:, :-1]) > 0)
    assert np.all(inner(y[:, 1:], y[:, :-1]) > 0)
    assert np.all(inner(x[1:, :], x[:-1, :]) > 0)
    assert np.all(inner(y[1:, :], y[:-1, :]) > 0)
