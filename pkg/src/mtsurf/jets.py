"""Surface jets: values and exact partial derivatives at parameter points.

Derivatives come from evaluating the component expression graphs on
truncated Taylor seeds, so an order-3 jet carries all twenty partial vectors
of z through third order at machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsl import Bin, Call, Expr, Neg, Num, SurfaceDef, Var, try_eval_const
from .errors import DomainViolationError, EvaluationError
from .taylor import Taylor2, apply_function, index_pairs

_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class Jet:
    """All partial derivative vectors of z at one or many (u, v) points.

    `d[(i, j)]` is the (du^i dv^j)-partial with shape (..., 4); the mixed
    partials occupy a single slot per multi-index, so symmetry holds by
    construction.
    """

    order: int
    d: dict
    u: np.ndarray
    v: np.ndarray

    @property
    def position(self):
        return self.d[(0, 0)]

    @property
    def zu(self):
        return self.d[(1, 0)]

    @property
    def zv(self):
        return self.d[(0, 1)]

    @property
    def zuu(self):
        return self.d[(2, 0)]

    @property
    def zuv(self):
        return self.d[(1, 1)]

    @property
    def zvv(self):
        return self.d[(0, 2)]

    @property
    def batch_shape(self):
        return self.position.shape[:-1]


def _check_domain(surface: SurfaceDef, u, v):
    (u0, u1), (v0, v1) = surface.domain
    du = _DOMAIN_SLACK * max(1.0, abs(u0), abs(u1)) + _DOMAIN_SLACK * surface.u_span
    dv = _DOMAIN_SLACK * max(1.0, abs(v0), abs(v1)) + _DOMAIN_SLACK * surface.v_span
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    bad = (u < u0 - du) | (u > u1 + du) | (v < v0 - dv) | (v > v1 + dv)
    if np.any(bad):
        idx = np.argwhere(np.atleast_1d(bad))[0]
        raise DomainViolationError(
            f"point outside domain [{u0},{u1}]x[{v0},{v1}] at batch index {idx.tolist()}"
        )


def _eval_taylor(node: Expr, env: dict, params: dict, order: int):
    """Evaluate an AST over Taylor seeds; constant subtrees stay floats."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in env:
            return env[node.name]
        return params[node.name]
    if isinstance(node, Neg):
        return -_eval_taylor(node.arg, env, params, order)
    if isinstance(node, Call):
        arg = _eval_taylor(node.arg, env, params, order)
        if isinstance(arg, Taylor2):
            return apply_function(node.fn, arg)
        try:
            return getattr(math, node.fn)(arg)
        except ValueError as exc:
            raise EvaluationError(f"{node.fn}: {exc}")
    lhs = _eval_taylor(node.lhs, env, params, order)
    rhs = _eval_taylor(node.rhs, env, params, order)
    if node.op == "+":
        return lhs + rhs
    if node.op == "-":
        return lhs - rhs
    if node.op == "*":
        return lhs * rhs
    if node.op == "/":
        if not isinstance(rhs, Taylor2) and rhs == 0:
            raise EvaluationError("division by zero")
        return lhs / rhs
    return _power(lhs, rhs, node, params)


def _power(lhs, rhs, node: Bin, params: dict):
    exponent = rhs if not isinstance(rhs, Taylor2) else try_eval_const(node.rhs, params)
    if exponent is not None:
        if isinstance(lhs, Taylor2):
            n = round(exponent)
            if abs(exponent - n) < 1e-12 and abs(n) <= 64:
                return lhs.ipow(int(n))
            return lhs.rpow(float(exponent))
        try:
            return math.pow(lhs, exponent)
        except (ValueError, OverflowError) as exc:
            raise EvaluationError(f"power: {exc}")
    # exponent genuinely depends on u or v: a^b = exp(b*log(a))
    if not isinstance(lhs, Taylor2):
        if lhs <= 0:
            raise EvaluationError("power of non-positive base with variable exponent")
        return (rhs * math.log(lhs)).exp()
    return (rhs * lhs.log()).exp()


def eval_jet_grid(surface: SurfaceDef, us, vs, order: int) -> Jet:
    """Evaluate a batched jet at arrays of parameter points."""
    if not 1 <= order <= 3:
        raise ValueError("order must be 1, 2, or 3")
    us = np.atleast_1d(np.asarray(us, dtype=float))
    vs = np.atleast_1d(np.asarray(vs, dtype=float))
    us, vs = np.broadcast_arrays(us, vs)
    _check_domain(surface, us, vs)
    env = {
        "u": Taylor2.variable(us, 0, order),
        "v": Taylor2.variable(vs, 1, order),
    }
    params = surface.param_map
    comps = []
    for comp in surface.components:
        val = _eval_taylor(comp, env, params, order)
        if not isinstance(val, Taylor2):
            val = Taylor2.constant(np.full(us.shape, float(val)), order)
        comps.append(val)
    d = {}
    for i, j in index_pairs(order):
        vecs = [np.broadcast_to(c.partial(i, j), us.shape) for c in comps]
        d[(i, j)] = np.stack(vecs, axis=-1)
    jet = Jet(order=order, d=d, u=us, v=vs)
    for arr in d.values():
        if not np.isfinite(arr).all():
            raise EvaluationError("non-finite value in jet evaluation")
    return jet


def eval_jet(surface: SurfaceDef, u: float, v: float, order: int) -> Jet:
    """Single-point jet; derivative arrays have shape (4,)."""
    jet = eval_jet_grid(surface, [u], [v], order)
    d = {k: val[0] for k, val in jet.d.items()}
    return Jet(order=order, d=d, u=jet.u[0], v=jet.v[0])


def _eval_value(node: Expr, u, v, params: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name == "u":
            return u
        if node.name == "v":
            return v
        return params[node.name]
    if isinstance(node, Neg):
        return -_eval_value(node.arg, u, v, params)
    if isinstance(node, Call):
        fn = {"log": np.log, "sqrt": np.sqrt}.get(node.fn, getattr(np, node.fn))
        with np.errstate(all="ignore"):
            return fn(_eval_value(node.arg, u, v, params))
    lhs = _eval_value(node.lhs, u, v, params)
    rhs = _eval_value(node.rhs, u, v, params)
    with np.errstate(all="ignore"):
        if node.op == "+":
            return lhs + rhs
        if node.op == "-":
            return lhs - rhs
        if node.op == "*":
            return lhs * rhs
        if node.op == "/":
            return lhs / rhs
        return np.power(lhs, rhs)


def eval_point_grid(surface: SurfaceDef, us, vs) -> np.ndarray:
    """Values of z only, shape (..., 4); the fast path for sampling."""
    us = np.asarray(us, dtype=float)
    vs = np.asarray(vs, dtype=float)
    us, vs = np.broadcast_arrays(us, vs)
    _check_domain(surface, us, vs)
    params = surface.param_map
    cols = []
    for comp in surface.components:
        val = _eval_value(comp, us, vs, params)
        cols.append(np.broadcast_to(np.asarray(val, dtype=float), us.shape))
    out = np.stack(cols, axis=-1)
    if not np.isfinite(out).all():
        raise EvaluationError("non-finite value in surface evaluation")
    return out
