import numpy as np
import pytest

from _oracles import jet_fd_worst_error
from mtsurf import eval_jet, eval_jet_grid, eval_point_grid, parse_surface
from mtsurf.errors import DomainViolationError, EvaluationError


def test_plane_jet():
    s = parse_surface("(u, v, 0, 0) on [0,1]x[0,1]")
    j = eval_jet(s, 0.3, 0.8, 2)
    np.testing.assert_array_equal(j.zu, [1, 0, 0, 0])
    np.testing.assert_array_equal(j.zv, [0, 1, 0, 0])
    for key in ((2, 0), (1, 1), (0, 2)):
        np.testing.assert_array_equal(j.d[key], np.zeros(4))


def test_bilinear_jet():
    s = parse_surface("(u, v, u*v, u*v) on [0,2]x[0,3]")
    j = eval_jet(s, 1.0, 2.0, 2)
    np.testing.assert_array_equal(j.zuv, [0, 0, 1, 1])
    np.testing.assert_array_equal(j.zuu, np.zeros(4))
    np.testing.assert_array_equal(j.zvv, np.zeros(4))
    np.testing.assert_array_equal(j.position, [1, 2, 2, 2])


def test_rotational_order3_vs_fd():
    s = parse_surface(
        "(cosh(u)*cos(v), cosh(u)*sin(v), sinh(u), u) on [-1,1]x[0,6.28]"
    )
    assert jet_fd_worst_error(s, 0.3, 0.7, order=3) <= 1e-6


def test_function_zoo_vs_fd():
    s = parse_surface(
        "(exp(u)*log(v + 2), sqrt(u + 1.5), u^2.5, sinh(u*v)) on [-1,1]x[-1,1]"
    )
    assert jet_fd_worst_error(s, 0.4, -0.3, order=3) <= 1e-6


def test_variable_exponent():
    s = parse_surface("(u^v, v, 0, 0) on [0.5,2]x[0.5,2]")
    j = eval_jet(s, 1.3, 1.7, 2)
    assert j.position[0] == pytest.approx(1.3**1.7, rel=1e-14)
    # d/du u^v = v u^(v-1)
    assert j.zu[0] == pytest.approx(1.7 * 1.3**0.7, rel=1e-12)
    # d/dv u^v = u^v log u
    assert j.zv[0] == pytest.approx(1.3**1.7 * np.log(1.3), rel=1e-12)


def test_integer_power_negative_base():
    s = parse_surface("(u^3, u^-2, v, 0) on [-2,-0.5]x[0,1]")
    j = eval_jet(s, -1.2, 0.5, 2)
    assert j.position[0] == pytest.approx((-1.2) ** 3, rel=1e-14)
    assert j.position[1] == pytest.approx((-1.2) ** -2, rel=1e-14)
    assert j.zu[0] == pytest.approx(3 * 1.2**2, rel=1e-13)


def test_domain_violation():
    s = parse_surface("(u, v, 0, 0) on [0,1]x[0,1]")
    with pytest.raises(DomainViolationError):
        eval_jet(s, 1.5, 0.5, 1)
    # boundary is allowed
    eval_jet(s, 1.0, 0.0, 1)


def test_non_finite_eval():
    s = parse_surface("(log(u), v, 0, 0) on [-1,1]x[0,1]")
    with pytest.raises(EvaluationError):
        eval_jet(s, -0.5, 0.5, 1)
    s2 = parse_surface("(sqrt(u), v, 0, 0) on [-1,1]x[0,1]")
    with pytest.raises(EvaluationError):
        eval_jet(s2, -0.5, 0.5, 1)
    s3 = parse_surface("(1/u, v, 0, 0) on [-1,1]x[0,1]")
    with pytest.raises(EvaluationError):
        eval_jet(s3, 0.0, 0.5, 1)


def test_batch_matches_scalar():
    s = parse_surface("(cos(u)*cosh(v), sin(u), v^2, u*v) on [0,3]x[-1,1]")
    us = np.array([0.3, 1.1, 2.4])
    vs = np.array([-0.5, 0.2, 0.9])
    batch = eval_jet_grid(s, us, vs, 3)
    for i in range(3):
        single = eval_jet(s, us[i], vs[i], 3)
        for key, val in single.d.items():
            np.testing.assert_allclose(batch.d[key][i], val, atol=1e-15)


def test_eval_point_grid_matches_jet():
    s = parse_surface("(cos(u), sin(u), v, 0) on [0,6.28]x[-1,1]")
    us = np.linspace(0.1, 6.0, 5)
    vs = np.linspace(-0.9, 0.9, 5)
    pts = eval_point_grid(s, us, vs)
    jets = eval_jet_grid(s, us, vs, 1)
    np.testing.assert_allclose(pts, jets.position, atol=1e-15)


def test_mixed_partial_symmetry_by_construction():
    s = parse_surface("(exp(u*v), sin(u + v), u^3*v, cosh(u)) on [-1,1]x[-1,1]")
    j = eval_jet(s, 0.37, -0.21, 3)
    # one slot per multi-index: (2,1) exists, no separate (1,2)-transposed slot
    assert set(j.d) == {(i, k) for i in range(4) for k in range(4 - i)}
