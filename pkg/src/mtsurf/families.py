"""Certified test-surface generation.

Closed-form control families come straight from DSL templates.  Marginally
trapped surfaces are manufactured by integrating a rotational profile ODE:
the surface (rho(u) cos v, rho(u) sin v, a(u), b(u)) is arclength-gauged in
u and the profile acceleration is solved pointwise from the requirement
that the mean curvature vector be lightlike.  One curvature degree of
freedom remains after the gauge and lightlike conditions; it is closed by
prescribing the timelike component 2*kappa(u) of the curvature data, so
every admissible kappa yields a different marginally trapped surface.

A second profile family keeps the curve on the unit hyperboloid and
enforces constant mean curvature of level ``h`` inside it; its lift is
marginally trapped exactly at h = 1, where the mean curvature vector is
also parallel.  That family is what the derivative-free search in
``find_parallel_H`` optimizes over.

Profiles are re-embedded as a single Chebyshev-fitted polynomial printed in
the surface DSL, so downstream jets differentiate the delivered surface
exactly and every certificate refers to the artifact actually returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.integrate import solve_ivp

from .dsl import SurfaceDef, parse_surface
from .errors import (
    BudgetExhaustedError,
    CertificateFailedError,
    ConstraintSingularityError,
    LostSpacelikeError,
    UnknownFamilyError,
)
from .frame import build_invariant_field, interior_grid
from .jets import eval_jet_grid
from .minkowski import inner
from .shape import (
    mean_curvature,
    normals_core,
    qval,
    second_fundamental,
    spacelike_mask,
)

TWO_PI_ISH = 6.2832


# -- closed-form families --------------------------------------------------------


def builtin_family(name: str, params: dict | None = None) -> SurfaceDef:
    """Instantiate a named template family as a parsed surface.

    Families: plane, cylinder, lightlike-graph, light-cone-slice,
    rotational, boost.  `params` overrides template defaults (expression
    strings and domain bounds).
    """
    params = dict(params or {})

    def dom(default):
        (u0, u1), (v0, v1) = params.pop("domain", default)
        return f"[{u0!r},{u1!r}]x[{v0!r},{v1!r}]"

    if name == "plane":
        text = f"(u, v, 0, 0) on {dom(((0.0, 1.0), (0.0, 1.0)))}"
    elif name == "cylinder":
        r = float(params.pop("radius", 1.0))
        text = (
            f"let r = {r!r};\n(r*cos(u), r*sin(u), v, 0) on "
            f"{dom(((0.0, TWO_PI_ISH), (-1.0, 1.0)))}"
        )
    elif name == "lightlike-graph":
        g = params.pop("g", "u^2 + v^2")
        text = f"(u, v, {g}, {g}) on {dom(((-1.0, 1.0), (-1.0, 1.0)))}"
    elif name == "light-cone-slice":
        text = (
            f"(sin(u)*cos(v), sin(u)*sin(v), cos(u), 1) on "
            f"{dom(((0.3, 1.2), (0.0, TWO_PI_ISH)))}"
        )
    elif name == "rotational":
        rho = params.pop("rho", "1")
        a = params.pop("a", "sinh(u)")
        b = params.pop("b", "cosh(u)")
        text = (
            f"(({rho})*cos(v), ({rho})*sin(v), {a}, {b}) on "
            f"{dom(((-1.0, 1.0), (0.0, TWO_PI_ISH)))}"
        )
    elif name == "boost":
        rho = params.pop("rho", "1")
        a = params.pop("a", "sin(u)")
        b = params.pop("b", "-cos(u)")
        text = (
            f"({a}, {b}, ({rho})*sinh(v), ({rho})*cosh(v)) on "
            f"{dom(((-1.0, 1.0), (-1.0, 1.0)))}"
        )
    else:
        raise UnknownFamilyError(f"unknown family {name!r}")
    if params:
        raise UnknownFamilyError(f"unused parameters for family {name!r}: {sorted(params)}")
    return parse_surface(text)


# -- certificates ------------------------------------------------------------------


@dataclass(frozen=True)
class CertificateTolerances:
    structural: float = 1e-6
    mt_scaled: float = 1e-7
    min_h: float = 1e-6
    min_lmn: float = 1e-6
    parallel_beta: float = 1e-6

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Certificate:
    """Machine-checked grid statistics for a generated or supplied surface.

    Verdicts are pure threshold functions of the recorded statistics.
    """

    surface_hash: str
    grid: tuple
    tolerances: dict
    max_hh_scaled: float
    min_h_norm: float
    min_lmn_norm: float
    max_beta: float
    max_abs_nu: float
    spacelike: bool
    marginally_trapped: bool
    flat_point_free: bool
    parallel_H: bool
    frame_points_poisoned: int

    def as_dict(self):
        d = asdict(self)
        d["grid"] = list(self.grid)
        return d

    @property
    def all_mt_checks(self) -> bool:
        return self.spacelike and self.marginally_trapped and self.flat_point_free


def certify(
    surface: SurfaceDef,
    grid=(21, 21),
    tolerances: CertificateTolerances | None = None,
) -> Certificate:
    """Evaluate certificate statistics over an interior grid.

    Total on geometric degeneracies: failed statistics are recorded as NaN
    and simply fail their threshold verdicts.
    """
    tols = tolerances or CertificateTolerances()
    us, vs = interior_grid(surface, grid[0], grid[1])
    jet = eval_jet_grid(surface, us, vs, 2)

    spacelike = bool(np.all(spacelike_mask(jet, tols.structural)))
    max_hh = math.nan
    min_h = math.nan
    min_lmn = math.nan
    if spacelike:
        H = mean_curvature(jet, tols.structural)
        hh = inner(H, H)
        h_sq = (H * H).sum(axis=-1)
        max_hh = float(np.max(np.abs(hh) / (1.0 + h_sq)))
        min_h = float(np.sqrt(h_sq.min()))
        sec = second_fundamental(jet, tol=tols.structural)
        min_lmn = float(sec.lmn_norm().min())

    max_beta = math.nan
    max_nu = math.nan
    poisoned = grid[0] * grid[1]
    mt_verdict = (
        spacelike and max_hh <= tols.mt_scaled and min_h >= tols.min_h
    )
    flat_free = spacelike and min_lmn >= tols.min_lmn
    if mt_verdict and flat_free:
        field = build_invariant_field(surface, grid=grid, tol=tols.structural)
        poisoned = field.n_poisoned
        if np.any(field.valid):
            max_beta = float(
                np.maximum(
                    np.abs(field.beta1[field.valid]), np.abs(field.beta2[field.valid])
                ).max()
            )
            max_nu = float(np.abs(field.nu[field.valid]).max())

    return Certificate(
        surface_hash=surface.content_hash(),
        grid=tuple(grid),
        tolerances=tols.as_dict(),
        max_hh_scaled=max_hh,
        min_h_norm=min_h,
        min_lmn_norm=min_lmn,
        max_beta=max_beta,
        max_abs_nu=max_nu,
        spacelike=spacelike,
        marginally_trapped=bool(mt_verdict),
        flat_point_free=bool(flat_free),
        parallel_H=bool(mt_verdict and not math.isnan(max_beta) and max_beta <= tols.parallel_beta),
        frame_points_poisoned=int(poisoned),
    )


# -- profile ODEs ------------------------------------------------------------------


def rotational_seed(rho0: float = 1.0, psi: float = 0.3, chi: float = 0.2,
                    a0: float = 0.0, b0: float = 0.0):
    """Arclength-normalized initial profile state (rho, a, b, rho', a', b')."""
    dr = math.cosh(psi) * math.cos(chi)
    da = math.cosh(psi) * math.sin(chi)
    db = math.sinh(psi)
    return (rho0, a0, b0, dr, da, db)


def hyperboloid_seed(rho0: float = 0.8, theta0: float = 0.15):
    """Initial state on the unit hyperboloid with unit spacelike velocity."""
    b0 = math.sqrt(1.0 + rho0 * rho0)
    tau1 = np.array([b0, 0.0, rho0])
    tau2 = np.array([0.0, 1.0, 0.0])
    vel = math.cos(theta0) * tau1 + math.sin(theta0) * tau2
    return (rho0, 0.0, b0, float(vel[0]), float(vel[1]), float(vel[2]))


def _guarded_events():
    def rho_floor(u, y):
        return y[0] - 0.05

    rho_floor.terminal = True

    def magnitude_cap(u, y):
        return 1e6 - float(np.abs(y).max())

    magnitude_cap.terminal = True
    return [rho_floor, magnitude_cap]


def _mt_rotational_rhs(kappa, branch: int, lightlike: bool):
    k0, k1 = kappa

    def rhs(u, y):
        rho, a, b, dr, da, db = y
        kap = k0 + k1 * u
        r2 = dr * dr + da * da
        if r2 <= 0:
            raise ConstraintSingularityError("profile velocity lost its spacelike part")
        B = 2.0 * kap
        if lightlike:
            disc = B * B - (db * B) ** 2 / r2
            if disc <= 0:
                raise ConstraintSingularityError("lightlike curvature solve degenerated")
            sq = math.sqrt(disc)
            base = db * B / r2
            P = dr * base + branch * (-da) * sq / math.sqrt(r2)
            A = da * base + branch * dr * sq / math.sqrt(r2)
        else:
            # control run: same magnitude, but along a spacelike normal ray
            r = math.sqrt(r2)
            P = B * (-da) / r
            A = B * dr / r
            B = 0.0
        ddr = P - (dr * dr - 1.0) / rho
        dda = A - (dr / rho) * da
        ddb = B - (dr / rho) * db
        return [dr, da, db, ddr, dda, ddb]

    return rhs


def _mt_screw_rhs(pitch, kappa, branch: int):
    """Screw-invariant profile: z = (rho cos v, rho sin v, a + p v, b + q v).

    The closure is linear here: with the curvature data expressed in the
    orthonormal normal basis, lightlike H of prescribed size means both
    normal components equal +-kappa, and the arclength gauge adds one more
    linear equation.
    """
    p, q = pitch
    k0, k1 = kappa

    def rhs(u, y):
        rho, a, b, dr, da, db = y
        kap = k0 + k1 * u
        zu = [dr, 0.0, da, db]
        zv = [0.0, rho, p, q]
        E = dr * dr + da * da - db * db
        F = da * p - db * q
        G = rho * rho + p * p - q * q
        w2 = E * G - F * F
        if w2 <= 0 or G <= 0:
            raise LostSpacelikeError("screw profile left the spacelike regime")
        n1h_q, n2h_q, _, _ = normals_core(
            [np.float64(c) for c in zu], [np.float64(c) for c in zv]
        )
        n1h = [float(v) for v in qval(n1h_q)]
        n2h = [float(v) for v in qval(n2h_q)]

        def dot4(x, yv):
            return x[0] * yv[0] + x[1] * yv[1] + x[2] * yv[2] - x[3] * yv[3]

        zuv = [0.0, dr, 0.0, 0.0]
        zvv = [-rho, 0.0, 0.0, 0.0]
        # trace vector M(s) = (G*zuu - 2F*zuv + E*zvv)/(2 w2), zuu = (s0, 0, s1, s2)
        cm = G / (2 * w2)
        base = [(-2 * F * zuv[k] + E * zvv[k]) / (2 * w2) for k in range(4)]
        row_h1 = np.array([cm * n1h[0], cm * n1h[2], -cm * n1h[3]])
        row_h2 = -np.array([cm * n2h[0], cm * n2h[2], -cm * n2h[3]])
        mat = np.stack([np.array([dr, da, -db]), row_h2, row_h1])
        rhs_v = np.array(
            [0.0, kap - (-dot4(base, n2h)), branch * kap - dot4(base, n1h)]
        )
        try:
            s = np.linalg.solve(mat, rhs_v)
        except np.linalg.LinAlgError as exc:
            raise ConstraintSingularityError(f"screw curvature solve failed: {exc}")
        return [dr, da, db, s[0], s[1], s[2]]

    return rhs


def _cmc_hyperboloid_rhs(h_level: float, branch: int):
    metric = np.array([1.0, 1.0, -1.0])
    cache = {"X": None}

    def rhs(u, y):
        rho, a, b, dr, da, db = y
        n1 = np.array([dr, da, -db])
        n2 = np.array([rho, a, -b])
        mx = np.stack([n1, n2])
        mmt = mx @ mx.T
        if abs(np.linalg.det(mmt)) < 1e-14:
            raise ConstraintSingularityError("curvature constraints became dependent")
        x0 = mx.T @ np.linalg.solve(mmt, np.array([0.0, -2.0]))
        w = np.cross(n1, n2)
        alpha = float((w * w * metric).sum())
        beta = 2.0 * float((x0 * w * metric).sum())
        gamma0 = float((x0 * x0 * metric).sum()) - 4.0 * (h_level**2 - 1.0)
        disc = beta * beta - 4.0 * alpha * gamma0
        if disc < 0:
            raise ConstraintSingularityError("curvature quadric has no real solution")
        if abs(alpha) < 1e-13 * (abs(beta) + abs(gamma0) + 1e-300):
            if beta == 0:
                raise ConstraintSingularityError("degenerate curvature solve")
            roots = [-gamma0 / beta]
        else:
            sq = math.sqrt(disc)
            roots = [(-beta + sq) / (2 * alpha), (-beta - sq) / (2 * alpha)]
        cands = [x0 + t * w for t in roots]
        if cache["X"] is None:
            key = [branch * c[2] for c in cands]
            X = cands[int(np.argmax(key))]
        else:
            d = [float(np.linalg.norm(c - cache["X"])) for c in cands]
            X = cands[int(np.argmin(d))]
        cache["X"] = X
        P, A, B = X
        ddr = P - (dr * dr - 1.0) / rho
        dda = A - (dr / rho) * da
        ddb = B - (dr / rho) * db
        return [dr, da, db, ddr, dda, ddb]

    return rhs


def _integrate_profile(rhs, state0, span: float, rtol: float, atol: float):
    sol = solve_ivp(
        rhs,
        (0.0, span),
        np.asarray(state0, dtype=float),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=_guarded_events(),
    )
    if not sol.success or sol.t[-1] < span - 1e-12:
        raise LostSpacelikeError(
            f"profile integration stopped at u = {sol.t[-1]:.6g} of {span:.6g}"
        )
    return sol


# -- polynomial embedding ----------------------------------------------------------


def _cheb_to_monomial(coef):
    """Chebyshev-basis to monomial-basis conversion in 50-digit arithmetic."""
    import mpmath as mp

    with mp.workdps(50):
        n = len(coef)
        out = [mp.mpf(0)] * n
        prev = [mp.mpf(1)]
        cur = [mp.mpf(0), mp.mpf(1)]
        out[0] += mp.mpf(coef[0])
        if n > 1:
            for j, c in enumerate(cur):
                out[j] += mp.mpf(coef[1]) * c
        for k in range(2, n):
            nxt = [mp.mpf(0)] * (k + 1)
            for j, c in enumerate(cur):
                nxt[j + 1] += 2 * c
            for j, c in enumerate(prev):
                nxt[j] -= c
            for j, c in enumerate(nxt):
                out[j] += mp.mpf(coef[k]) * c
            prev, cur = cur, nxt
        return [float(x) for x in out]


def _horner_text(mono, t_expr: str) -> str:
    expr = repr(mono[-1])
    for c in reversed(mono[:-1]):
        expr = f"({expr}*{t_expr} + {c!r})"
    return expr


def _fit_component(fn, lo: float, hi: float, degree: int, tail_tol: float = 1e-13):
    cheb = np.polynomial.chebyshev.Chebyshev.interpolate(fn, degree, domain=[lo, hi])
    coef = cheb.coef
    scale = np.abs(coef).max()
    keep = len(coef)
    while keep > 9 and abs(coef[keep - 1]) < tail_tol * scale:
        keep -= 1
    return coef[:keep]


def embed_rotational_profile(
    sol, span: float, v_domain, degree: int = 36, pad_rel: float = 0.02,
    layout: str = "rotational", pitch=(0.0, 0.0),
) -> SurfaceDef:
    """Print a profile solution as a DSL surface with polynomial components."""
    pad = pad_rel * span
    lo, hi = 0.0, span
    mid = 0.5 * (lo + hi)
    scale = 2.0 / (hi - lo)
    t_expr = "((u - um)*us)"

    horners = []
    for k in range(3):
        coef = _fit_component(lambda x, k=k: sol.sol(x)[k], lo, hi, degree)
        mono = _cheb_to_monomial(coef)
        horners.append(_horner_text(mono, t_expr))
    rr, aa, bb = horners

    lets = [f"let um = {mid!r};", f"let us = {scale!r};"]
    if layout == "rotational":
        tuple_text = f"({rr}*cos(v), {rr}*sin(v), {aa}, {bb})"
    elif layout == "boost":
        tuple_text = f"({aa}, {bb}, {rr}*sinh(v), {rr}*cosh(v))"
    elif layout == "screw":
        lets += [f"let p = {pitch[0]!r};", f"let q = {pitch[1]!r};"]
        tuple_text = f"({rr}*cos(v), {rr}*sin(v), {aa} + p*v, {bb} + q*v)"
    else:
        raise ValueError(f"unknown layout {layout!r}")
    v0, v1 = v_domain
    text = (
        "\n".join(lets) + "\n"
        f"{tuple_text} on [{lo + pad!r},{hi - pad!r}]x[{v0!r},{v1!r}]"
    )
    return parse_surface(text)


# -- generator entry points ----------------------------------------------------------


def solve_mt_rotational(
    initial_state=None,
    span: float = 1.2,
    kappa=(0.6, 0.25),
    branch: int = 1,
    lightlike: bool = True,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    v_domain=(0.0, TWO_PI_ISH),
    grid=(21, 21),
    tolerances: CertificateTolerances | None = None,
    degree: int = 44,
):
    """Integrate the rotational profile and return (surface, certificate).

    With ``lightlike=False`` the curvature data is steered along a spacelike
    normal ray of the same magnitude instead (the constraint-disabled
    control run); no marginally trapped certificate is then required.
    """
    state0 = rotational_seed() if initial_state is None else tuple(initial_state)
    rhs = _mt_rotational_rhs(tuple(kappa), branch, lightlike)
    sol = _integrate_profile(rhs, state0, span, rtol, atol)
    surface = embed_rotational_profile(sol, span, v_domain, degree)
    cert = certify(surface, grid, tolerances)
    if lightlike and not (cert.spacelike and cert.marginally_trapped):
        raise CertificateFailedError(
            f"generated surface failed certification: "
            f"spacelike={cert.spacelike} max_hh_scaled={cert.max_hh_scaled:.3e}"
        )
    return surface, cert


def solve_mt_screw(
    initial_state=None,
    span: float = 1.2,
    pitch=(0.45, 0.2),
    kappa=(0.7, 0.2),
    branch: int = 1,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    v_domain=(0.0, TWO_PI_ISH),
    grid=(21, 21),
    tolerances: CertificateTolerances | None = None,
    degree: int = 44,
):
    """Marginally trapped surface swept by a screw motion (rotation plus a
    translation of the given pitch).  Unlike the purely rotational family
    its normal connection is curved, so the nu invariant is nonzero."""
    state0 = rotational_seed() if initial_state is None else tuple(initial_state)
    rhs = _mt_screw_rhs(tuple(pitch), tuple(kappa), branch)
    sol = _integrate_profile(rhs, state0, span, rtol, atol)
    surface = embed_rotational_profile(
        sol, span, v_domain, degree, layout="screw", pitch=tuple(pitch)
    )
    cert = certify(surface, grid, tolerances)
    if not (cert.spacelike and cert.marginally_trapped):
        raise CertificateFailedError(
            f"screw surface failed certification: spacelike={cert.spacelike} "
            f"max_hh_scaled={cert.max_hh_scaled:.3e}"
        )
    return surface, cert


def solve_cmc_hyperboloid(
    h_level: float,
    rho0: float = 0.8,
    theta0: float = 0.15,
    span: float = 1.0,
    branch: int = 1,
    rtol: float = 1e-12,
    atol: float = 1e-14,
    v_domain=(0.0, TWO_PI_ISH),
    degree: int = 44,
) -> SurfaceDef:
    """Rotational surface of constant mean curvature ``h_level`` inside the
    unit hyperboloid; marginally trapped with parallel H exactly at level 1."""
    state0 = hyperboloid_seed(rho0, theta0)
    rhs = _cmc_hyperboloid_rhs(h_level, branch)
    sol = _integrate_profile(rhs, state0, span, rtol, atol)
    return embed_rotational_profile(sol, span, v_domain, degree)


_FAMILY_SEED_PARAMS = {
    "cmc-hyperboloid": {"h": 1.2},
    "rotational": {"k0": 0.6, "k1": 0.25},
}


@dataclass
class SearchTrace:
    evaluations: int
    best_params: dict
    best_stat: float
    best_mt_violation: float


def _parallel_candidate(family: str, params: dict) -> SurfaceDef:
    if family == "cmc-hyperboloid":
        return solve_cmc_hyperboloid(h_level=float(params["h"]))
    if family == "rotational":
        surface, _ = solve_mt_rotational(kappa=(params["k0"], params["k1"]), grid=(5, 5))
        return surface
    raise UnknownFamilyError(f"unknown family {family!r}")


def find_parallel_H(
    family: str = "cmc-hyperboloid",
    initial_params: dict | None = None,
    budget: int = 150,
    beta_target: float = 1e-6,
    grid=(21, 21),
    coarse_grid=(7, 7),
    tolerances: CertificateTolerances | None = None,
):
    """Derivative-free search for a parallel-H marginally trapped surface.

    Compass (pattern) search over the family parameters minimizes the grid
    statistic max(|beta1|, |beta2|) plus a penalty for violating the
    marginally trapped certificate.  Succeeds when a full-grid certificate
    passes with max beta at or below ``beta_target``; otherwise raises
    BudgetExhaustedError carrying the best candidate seen.
    """
    if family not in _FAMILY_SEED_PARAMS:
        raise UnknownFamilyError(f"unknown family {family!r}")
    tols = tolerances or CertificateTolerances(parallel_beta=beta_target)
    params = dict(_FAMILY_SEED_PARAMS[family])
    params.update(initial_params or {})
    names = sorted(params)
    steps = {n: max(0.05, 0.1 * abs(params[n])) for n in names}
    evals = 0

    def objective(p):
        nonlocal evals
        evals += 1
        try:
            surface = _parallel_candidate(family, p)
            cert = certify(surface, coarse_grid, tols)
        except (ConstraintSingularityError, LostSpacelikeError, CertificateFailedError):
            return math.inf, math.inf, math.inf, None
        # far from the feasible set the frame statistics are undefined, so
        # the lightlike-H violation alone must steer the search
        mt_violation = cert.max_hh_scaled
        if math.isnan(mt_violation):
            return math.inf, math.inf, math.inf, None
        beta = cert.max_beta
        obj = mt_violation + (0.0 if math.isnan(beta) else beta)
        return obj, beta, mt_violation, surface

    best_obj, best_beta, best_viol, best_surface = objective(params)
    best_params = dict(params)

    while evals < budget:
        # success check on the promising candidate
        if (
            best_surface is not None
            and best_viol <= tols.mt_scaled
            and (math.isnan(best_beta) or best_beta <= 10 * beta_target)
        ):
            cert = certify(best_surface, grid, tols)
            if cert.all_mt_checks and cert.parallel_H:
                return best_surface, cert

        improved = False
        for n in names:
            for direction in (1.0, -1.0):
                if evals >= budget:
                    break
                trial = dict(best_params)
                trial[n] = trial[n] + direction * steps[n]
                obj, beta, viol, surf = objective(trial)
                if obj < best_obj:
                    best_obj, best_beta, best_viol = obj, beta, viol
                    best_surface, best_params = surf, trial
                    improved = True
        if not improved:
            for n in names:
                steps[n] *= 0.5
            if max(steps.values()) < 1e-13:
                break

    if best_surface is not None:
        cert = certify(best_surface, grid, tols)
        if cert.all_mt_checks and cert.parallel_H:
            return best_surface, cert
    trace = SearchTrace(
        evaluations=evals,
        best_params=best_params,
        best_stat=best_beta,
        best_mt_violation=best_viol,
    )
    raise BudgetExhaustedError(
        f"no parallel-H surface within budget: best max|beta| = {best_beta:.3e} "
        f"after {evals} evaluations",
        best=trace,
    )
