import numpy as np
import pytest

from mtsurf import (
    christoffels,
    classify_point,
    eval_jet,
    eval_jet_grid,
    first_fundamental,
    inner,
    intrinsic_gauss_curvature,
    mean_curvature,
    normal_connection_curvature,
    orthonormal_normals,
    parse_surface,
    point_geometry,
    second_fundamental,
)
from mtsurf.errors import NotSpacelikeError
from mtsurf.frame import interior_grid
from mtsurf.minkowski import det4
from mtsurf.shape import mean_curvature_core, jet_quads, qval, sigma_and_christoffels

WEIERSTRASS = (
    "(sinh(u)*cos(v), -sinh(u)*sin(v), cosh(2*u)*cos(2*v)/2, sinh(2*u)*cos(2*v)/2)"
    " on [0.2,0.8]x[0.2,0.8]"
)

TORUS_4D = "(cos(u), sin(u), cos(v), sin(v)) on [0.9,2.2]x[0.9,2.2]"


def _grid_jet(surface, n=6, order=2):
    us, vs = interior_grid(surface, n, n)
    return eval_jet_grid(surface, us, vs, order)


def test_first_form_plane(plane):
    f = first_fundamental(eval_jet(plane, 0.3, 0.4, 1))
    assert (f.E, f.F, f.G, f.W) == (1.0, 0.0, 1.0, 1.0)


def test_first_form_lightlike_graph(lightlike_graph):
    jet = _grid_jet(lightlike_graph, order=1)
    f = first_fundamental(jet)
    np.testing.assert_allclose(f.E, 1.0, atol=1e-14)
    np.testing.assert_allclose(f.F, 0.0, atol=1e-14)
    np.testing.assert_allclose(f.G, 1.0, atol=1e-14)


def test_degenerate_strip_not_spacelike():
    s = parse_surface("(u, u, 0, 0) on [0,1]x[0,1]")
    with pytest.raises(NotSpacelikeError):
        first_fundamental(eval_jet(s, 0.5, 0.5, 1))


def test_plane_normals(plane):
    n1, n2 = orthonormal_normals(eval_jet(plane, 0.3, 0.4, 1))
    np.testing.assert_array_equal(n1, [0, 0, 1, 0])
    np.testing.assert_array_equal(n2, [0, 0, 0, 1])


def test_cylinder_normals_oriented():
    s = parse_surface("(cos(u), sin(u), v, 0) on [0,6.28]x[-1,1]")
    us, vs = interior_grid(s, 9, 3)
    jet = eval_jet_grid(s, us, vs, 1)
    n1, n2 = orthonormal_normals(jet)
    np.testing.assert_allclose(n2, np.broadcast_to([0, 0, 0, 1.0], n2.shape), atol=1e-14)
    radial = np.stack([np.cos(us), np.sin(us), 0 * us, 0 * us], axis=-1)
    # n1 is the radial direction up to the orientation-fixing sign
    agreement = np.abs((n1 * radial).sum(axis=-1))
    np.testing.assert_allclose(agreement, 1.0, atol=1e-14)
    rows = np.stack([jet.zu, jet.zv, n1, n2], axis=-2)
    assert np.all(det4(rows) > 0)


@pytest.mark.parametrize("text", [
    WEIERSTRASS,
    TORUS_4D,
    "(cosh(u)*cos(v), cosh(u)*sin(v), sinh(u), u) on [-1,1]x[0,6.28]",
])
def test_normal_constraints_random_surfaces(text):
    s = parse_surface(text)
    jet = _grid_jet(s, order=1)
    n1, n2 = orthonormal_normals(jet)
    for r in (
        inner(n1, n1) - 1, inner(n2, n2) + 1, inner(n1, n2),
        inner(n1, jet.zu), inner(n1, jet.zv), inner(n2, jet.zu), inner(n2, jet.zv),
    ):
        assert np.abs(r).max() <= 1e-12


def test_second_form_plane_geodesic(plane):
    jet = eval_jet(plane, 0.5, 0.5, 2)
    sec = second_fundamental(jet)
    assert (sec.L, sec.M, sec.N) == (0.0, 0.0, 0.0)
    assert np.all(sec.c1 == 0) and np.all(sec.c2 == 0)
    assert classify_point(jet) == "totally_geodesic"


def test_second_form_lightlike_graph_flat(lightlike_graph):
    jet = _grid_jet(lightlike_graph)
    sec = second_fundamental(jet)
    np.testing.assert_allclose(sec.lmn_norm(), 0.0, atol=1e-12)
    # sigma values are all parallel to the null direction (0,0,1,1)
    sigmas, _ = sigma_and_christoffels(jet)
    for s in sigmas:
        arr = qval(s)
        np.testing.assert_allclose(arr[..., 0], 0.0, atol=1e-13)
        np.testing.assert_allclose(arr[..., 1], 0.0, atol=1e-13)
        np.testing.assert_allclose(arr[..., 2] - arr[..., 3], 0.0, atol=1e-13)


def test_second_form_nonflat_torus_like():
    jet = _grid_jet(parse_surface(TORUS_4D))
    sec = second_fundamental(jet)
    assert sec.lmn_norm().min() > 0.5


def test_mean_curvature_lightlike_graph(lightlike_graph):
    jet = _grid_jet(lightlike_graph)
    H = mean_curvature(jet)
    # H = (g_uu + g_vv)/2 * (0,0,1,1) with g = u^2 + v^2
    np.testing.assert_allclose(H[..., 2], 2.0, atol=1e-12)
    np.testing.assert_allclose(H[..., 3], 2.0, atol=1e-12)
    np.testing.assert_allclose(H[..., 0], 0.0, atol=1e-12)
    np.testing.assert_allclose(inner(H, H), 0.0, atol=1e-12)


def test_light_cone_slice_h_unit(light_cone_slice):
    jet = _grid_jet(light_cone_slice)
    H = mean_curvature(jet)
    np.testing.assert_allclose(inner(H, H), 1.0, atol=1e-9)


def test_mean_curvature_basis_independence():
    s = parse_surface(TORUS_4D)
    jet = _grid_jet(s)
    q = jet_quads(jet)
    sigmas, _ = sigma_and_christoffels(jet)
    H_fwd = qval(mean_curvature_core(q[(1, 0)], q[(0, 1)], *sigmas))
    H_rev = qval(mean_curvature_core(q[(1, 0)], q[(0, 1)], *sigmas, reverse=True))
    np.testing.assert_allclose(H_fwd, H_rev, atol=1e-12)


def test_christoffels_polar_patch():
    s = parse_surface("(u*cos(v), u*sin(v), 0, 0) on [0.5,2]x[0,6.28]")
    gam = christoffels(eval_jet(s, 1.3, 0.8, 2))
    assert gam[1, 1, 0] == pytest.approx(-1.3, abs=1e-12)
    assert gam[0, 1, 1] == pytest.approx(1 / 1.3, abs=1e-12)
    assert gam[0, 0, 0] == pytest.approx(0.0, abs=1e-12)


def test_christoffels_residual_property():
    s = parse_surface(WEIERSTRASS)
    jet = _grid_jet(s)
    gam = christoffels(jet)
    sigmas, _ = sigma_and_christoffels(jet)
    # tangential remainder of each second derivative is metric-orthogonal
    for idx, key in enumerate(((2, 0), (1, 1), (0, 2))):
        i, j = (0, 0) if key == (2, 0) else ((0, 1) if key == (1, 1) else (1, 1))
        rem = jet.d[key] - gam[..., i, j, 0, None] * jet.zu - gam[..., i, j, 1, None] * jet.zv
        assert np.abs(inner(rem, jet.zu)).max() <= 1e-10
        assert np.abs(inner(rem, jet.zv)).max() <= 1e-10


def test_classification_table(plane, lightlike_graph, light_cone_slice, mt_rotational):
    assert classify_point(eval_jet(plane, 0.5, 0.5, 2)) == "totally_geodesic"
    assert classify_point(_grid_jet(lightlike_graph)).tolist() == ["flat_point"] * 36
    # the slice lies in an affine 3-plane, hence flat points (H is spacelike there)
    assert classify_point(eval_jet(light_cone_slice, 0.7, 1.0, 2)) == "flat_point"
    surface, cert = mt_rotational
    assert cert.marginally_trapped
    assert np.all(classify_point(_grid_jet(surface), tol=1e-6) == "marginally_trapped")
    assert classify_point(_grid_jet(parse_surface(TORUS_4D))).tolist() == ["generic"] * 36


def test_umbilical_points_have_zero_H():
    s = parse_surface(WEIERSTRASS)
    jet = _grid_jet(s)
    assert np.all(classify_point(jet) == "umbilical_H_zero")
    f = first_fundamental(jet)
    sec = second_fundamental(jet)
    rho = sec.L / f.E
    assert np.abs(rho).min() > 0.1  # rho != 0
    np.testing.assert_allclose(sec.M, rho * f.F, atol=1e-12)
    np.testing.assert_allclose(sec.N, rho * f.G, atol=1e-10)
    H = mean_curvature(jet)
    assert np.linalg.norm(H, axis=-1).max() <= 1e-12


def test_flat_iff_sigma_rank_one(lightlike_graph):
    for text, expect_flat in ((None, True), (TORUS_4D, False)):
        s = lightlike_graph if text is None else parse_surface(text)
        jet = _grid_jet(s)
        sec = second_fundamental(jet)
        mat = np.stack([sec.c1, sec.c2], axis=-2)  # (..., 2, 3)
        second_sv = np.linalg.svd(mat, compute_uv=False)[..., 1]
        flat = sec.lmn_norm() <= 1e-9
        rank_le_1 = second_sv <= 1e-9
        assert np.array_equal(flat, rank_le_1)
        assert bool(flat.all()) is expect_flat


def test_point_geometry_bundle(mt_rotational):
    surface, _ = mt_rotational
    us, vs = interior_grid(surface, 3, 3)
    geo = point_geometry(eval_jet_grid(surface, us, vs, 2), tol=1e-6)
    assert geo.H.shape == (9, 4)
    assert geo.gamma.shape == (9, 2, 2, 2)
    assert set(geo.classification) == {"marginally_trapped"}


def test_intrinsic_curvature_sphere_slice(light_cone_slice):
    K = intrinsic_gauss_curvature(light_cone_slice, [0.7, 0.9], [1.0, 2.0])
    np.testing.assert_allclose(K, 1.0, atol=1e-10)


def test_normal_curvature_zero_on_rotational(mt_rotational):
    surface, _ = mt_rotational
    us, vs = interior_grid(surface, 4, 4)
    kap = normal_connection_curvature(surface, us, vs)
    assert np.abs(kap).max() <= 1e-8
