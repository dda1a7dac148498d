"""Gauss map analysis for marginally trapped surfaces.

The Gauss map G = x ^ y lives in the 6-dimensional bivector space with the
split (3,3) inner product.  Its Laplacian is computed three independent
ways: by the definition (second-order stencils on the aligned frame field),
by the six-term expansion in the invariants and their first derivatives,
and by the four-term closed form.  The closed form also drives the
eigenfunction-style fit dG = phi*(G + C) and the end-to-end verification
that the fit succeeds exactly when the mean curvature vector is parallel.

Sign convention: the Laplacian carries the geometer's leading minus, i.e.
on a flat torus it is minus the coordinate Laplacian.  All fit residuals
and disagreement measures are Euclidean on the six components, scaled by
1 + the larger operand norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .dsl import SurfaceDef
from .errors import (
    DegenerateFitError,
    DivisionNearZeroError,
    FlatPointError,
    InconclusiveToleranceError,
    MixedBranchError,
    NotMarginallyTrappedError,
    NotSpacelikeError,
    UmbilicalError,
)
from .frame import (
    REASON_FLAT,
    REASON_NOT_MT,
    REASON_NOT_SPACELIKE,
    REASON_UMBILIC,
    GeometricFrame,
    Invariants,
    InvariantField,
    build_invariant_field,
)
from .minkowski import wedge

_CURVED = "curved"
_FLAT = "flat"


def gauss_map(frame: GeometricFrame) -> np.ndarray:
    """G = x ^ y, shape (..., 6); unit for the split metric by construction."""
    return wedge(frame.x, frame.y)


def _field_wedges(field_or_point):
    p = field_or_point
    return {
        "xy": wedge(p.x, p.y),
        "xn1": wedge(p.x, p.n1),
        "yn1": wedge(p.y, p.n1),
        "xn2": wedge(p.x, p.n2),
        "yn2": wedge(p.y, p.n2),
        "n1n2": wedge(p.n1, p.n2),
    }


def laplacian_closed_form(inv: Invariants, frame: GeometricFrame) -> np.ndarray:
    """Four-term closed form of the Gauss map Laplacian in the invariants."""
    w = _field_wedges(frame)
    lam, mu, nu = (np.asarray(t)[..., None] for t in (inv.lam, inv.mu, inv.nu))
    b1, b2 = (np.asarray(t)[..., None] for t in (inv.beta1, inv.beta2))
    return (
        -4.0 * lam * mu * w["xy"]
        - 2.0 * b2 * w["xn1"]
        + 2.0 * b1 * w["yn1"]
        - 4.0 * mu * nu * w["n1n2"]
    )


def expansion_coefficients(field: InvariantField) -> dict:
    """The six coefficient fields of the first-derivative expansion of the
    Laplacian (the x^n2 and y^n2 coefficients are compatibility residuals
    and should vanish)."""
    x_lam, y_lam = field.frame_derivative(lambda sp: sp.lam, richardson=True)
    x_nu, y_nu = field.frame_derivative(lambda sp: sp.nu, richardson=True)
    x_mu, y_mu = field.frame_derivative(lambda sp: sp.mu, richardson=True)
    nu, lam, mu = field.nu, field.lam, field.mu
    g1, g2 = field.gamma1, field.gamma2
    b1, b2 = field.beta1, field.beta2
    return {
        "xy": -4.0 * lam * mu,
        "xn1": -(x_lam - y_nu - 2 * lam * g2 + 2 * nu * g1 + lam * b1 + (1 - nu) * b2),
        "xn2": -(x_mu - 2 * mu * g2 - mu * b1),
        "yn2": y_mu - 2 * mu * g1 - mu * b2,
        "yn1": x_nu + y_lam - 2 * lam * g1 - 2 * nu * g2 + (1 + nu) * b1 + lam * b2,
        "n1n2": -4.0 * mu * nu,
    }


def laplacian_expanded(field: InvariantField) -> np.ndarray:
    """Six-term expansion of the Laplacian with numeric invariant derivatives."""
    w = _field_wedges(field)
    coeff = expansion_coefficients(field)
    return sum(coeff[k][..., None] * w[k] for k in coeff)


def laplacian_numeric_field(field: InvariantField) -> np.ndarray:
    """Laplacian by the definition, on the field's stencil.

    Second differences of the aligned Gauss map field are plain central
    (second order); the first-derivative terms are Richardson-extrapolated
    once.  The overall scheme is second order in the stencil step.
    """
    h_u, h_v = field.h_u, field.h_v
    g_of = lambda sp: wedge(sp.x, sp.y)
    G0 = wedge(field.x, field.y)

    st = field.stencil
    G_uu = (g_of(st[(1, 0)]) - 2 * G0 + g_of(st[(-1, 0)])) / h_u**2
    G_vv = (g_of(st[(0, 1)]) - 2 * G0 + g_of(st[(0, -1)])) / h_v**2
    G_uv = (
        g_of(st[(1, 1)]) - g_of(st[(1, -1)]) - g_of(st[(-1, 1)]) + g_of(st[(-1, -1)])
    ) / (4 * h_u * h_v)
    G_u, G_v = field.axis_derivative(g_of, richardson=True)

    a, b = field.x_coeffs[..., 0, None], field.x_coeffs[..., 1, None]
    c, d = field.y_coeffs[..., 0, None], field.y_coeffs[..., 1, None]
    a_ax = field.axis_derivative(lambda sp: sp.x_coeffs[..., 0], richardson=False)
    b_ax = field.axis_derivative(lambda sp: sp.x_coeffs[..., 1], richardson=False)
    c_ax = field.axis_derivative(lambda sp: sp.y_coeffs[..., 0], richardson=False)
    d_ax = field.axis_derivative(lambda sp: sp.y_coeffs[..., 1], richardson=False)

    xx = (
        a * a * G_uu + 2 * a * b * G_uv + b * b * G_vv
        + (a * a_ax[0][..., None] + b * a_ax[1][..., None]) * G_u
        + (a * b_ax[0][..., None] + b * b_ax[1][..., None]) * G_v
    )
    yy = (
        c * c * G_uu + 2 * c * d * G_uv + d * d * G_vv
        + (c * c_ax[0][..., None] + d * c_ax[1][..., None]) * G_u
        + (c * d_ax[0][..., None] + d * d_ax[1][..., None]) * G_v
    )
    dx_G = a * G_u + b * G_v
    dy_G = c * G_u + d * G_v
    g1, g2 = field.gamma1[..., None], field.gamma2[..., None]
    return -xx - yy + g1 * dy_G + g2 * dx_G


def laplacian_numeric(
    surface: SurfaceDef, u: float, v: float, h: float | None = None, tol: float = 1e-6
) -> np.ndarray:
    """Laplacian by the definition at one point, shape (6,)."""
    field = build_invariant_field(surface, h=h, tol=tol, us=[u], vs=[v])
    if field.poisoned[0]:
        raise FlatPointError("Laplacian stencil hit an invalid point")
    return laplacian_numeric_field(field)[0]


def relative_disagreement(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pointwise ||A - B|| / (1 + max(||A||, ||B||)) on the components."""
    nA = np.linalg.norm(A, axis=-1)
    nB = np.linalg.norm(B, axis=-1)
    return np.linalg.norm(A - B, axis=-1) / (1.0 + np.maximum(nA, nB))


# -- the difference field T ---------------------------------------------------------


@dataclass
class TFieldResult:
    """T (or its flat-branch analogue) with numeric and closed derivatives."""

    branch: str
    T: np.ndarray
    dT_x_numeric: np.ndarray
    dT_y_numeric: np.ndarray
    dT_x_closed: np.ndarray
    dT_y_closed: np.ndarray
    valid: np.ndarray

    def max_gradient(self) -> float:
        n = np.maximum(
            np.linalg.norm(self.dT_x_numeric, axis=-1),
            np.linalg.norm(self.dT_y_numeric, axis=-1),
        )
        vals = n[self.valid & np.isfinite(n)]
        return float(vals.max()) if vals.size else math.nan

    def closed_form_disagreement(self) -> float:
        d = np.maximum(
            relative_disagreement(self.dT_x_numeric, self.dT_x_closed),
            relative_disagreement(self.dT_y_numeric, self.dT_y_closed),
        )
        vals = d[self.valid & np.isfinite(d)]
        return float(vals.max()) if vals.size else math.nan

    def is_constant(self, tol: float = 1e-4) -> bool:
        return self.max_gradient() <= tol


def _t_bivector(p, branch):
    """T on a field or stencil point: the non-G part of the Laplacian,
    normalized by the Gauss-curvature factor on the curved branch."""
    w = _field_wedges(p)
    if branch == _CURVED:
        denom = 2.0 * p.lam * p.mu
        return (
            (p.beta2 / denom)[..., None] * w["xn1"]
            - (p.beta1 / denom)[..., None] * w["yn1"]
            + (p.nu / p.lam)[..., None] * w["n1n2"]
        )
    return (
        p.beta2[..., None] * w["xn1"]
        - p.beta1[..., None] * w["yn1"]
        + (2.0 * p.mu * p.nu)[..., None] * w["n1n2"]
    )


def compute_T(
    field: InvariantField, lam_tol: float = 1e-6, div_tol: float = 1e-9
) -> TFieldResult:
    """Evaluate T and its derivatives, choosing the curved or flat branch by
    the size of lambda over the grid; mixed grids are rejected."""
    ok = field.stencil_all_valid()
    if not np.any(ok):
        raise FlatPointError("no valid points for the T field")
    lam_abs = np.abs(field.lam[ok])
    if lam_abs.max() <= lam_tol:
        branch = _FLAT
    elif lam_abs.min() > lam_tol:
        branch = _CURVED
    else:
        raise MixedBranchError(
            f"lambda changes character across the grid "
            f"(|lam| in [{lam_abs.min():.2e}, {lam_abs.max():.2e}])"
        )
    if branch == _CURVED and np.abs(2 * field.lam[ok] * field.mu[ok]).min() <= div_tol:
        raise DivisionNearZeroError("2*lambda*mu too small for the curved branch")

    with np.errstate(all="ignore"):
        T0 = _t_bivector(field, branch)
        dT_x, dT_y = field.frame_derivative(lambda sp: _t_bivector(sp, branch),
                                            richardson=True)
        w = _field_wedges(field)
        nu, lam, mu = field.nu, field.lam, field.mu
        g1, g2 = field.gamma1, field.gamma2
        b1, b2 = field.beta1, field.beta2

        if branch == _CURVED:
            x_q2, y_q2 = field.frame_derivative(
                lambda sp: sp.beta2 / (2 * sp.lam * sp.mu), richardson=True)
            x_q1, y_q1 = field.frame_derivative(
                lambda sp: sp.beta1 / (2 * sp.lam * sp.mu), richardson=True)
            x_r, y_r = field.frame_derivative(
                lambda sp: sp.nu / sp.lam, richardson=True)
            denom = 2 * lam * mu
            dTx_cl = (
                (b2 / (2 * lam))[..., None] * w["xy"]
                + (x_q2 + (b1 * b2 + b1 * g1) / denom - nu * (1 + nu) / lam)[..., None] * w["xn1"]
                + (-x_q1 + (b2 * g1 - b1**2) / denom - nu)[..., None] * w["yn1"]
                + (nu * mu / lam)[..., None] * w["yn2"]
                + (b1 / (2 * lam) + x_r)[..., None] * w["n1n2"]
            )
            dTy_cl = (
                (b1 / (2 * lam))[..., None] * w["xy"]
                + (y_q2 + (b2**2 - b1 * g2) / denom - nu)[..., None] * w["xn1"]
                + (nu * mu / lam)[..., None] * w["xn2"]
                + (-y_q1 - (b1 * b2 + b2 * g2) / denom - nu * (1 - nu) / lam)[..., None] * w["yn1"]
                + (y_r - b2 / (2 * lam))[..., None] * w["n1n2"]
            )
        else:
            x_b2, y_b2 = field.frame_derivative(lambda sp: sp.beta2, richardson=True)
            x_b1, y_b1 = field.frame_derivative(lambda sp: sp.beta1, richardson=True)
            x_mn, y_mn = field.frame_derivative(
                lambda sp: 2 * sp.mu * sp.nu, richardson=True)
            dTx_cl = (
                (mu * b2)[..., None] * w["xy"]
                + (x_b2 + b1 * b2 + b1 * g1 - 2 * mu * nu * (1 + nu))[..., None] * w["xn1"]
                + (-x_b1 + b2 * g1 - b1**2)[..., None] * w["yn1"]
                + (2 * mu**2 * nu)[..., None] * w["yn2"]
                + (x_mn + mu * b1)[..., None] * w["n1n2"]
            )
            dTy_cl = (
                (mu * b1)[..., None] * w["xy"]
                + (y_b2 + b2**2 - b1 * g2)[..., None] * w["xn1"]
                + (2 * mu**2 * nu)[..., None] * w["xn2"]
                + (-y_b1 - b1 * b2 - b2 * g2 - 2 * mu * nu * (1 - nu))[..., None] * w["yn1"]
                + (y_mn - mu * b2)[..., None] * w["n1n2"]
            )

    return TFieldResult(
        branch=branch, T=T0,
        dT_x_numeric=dT_x, dT_y_numeric=dT_y,
        dT_x_closed=dTx_cl, dT_y_closed=dTy_cl,
        valid=ok,
    )


# -- pointwise 1-type fit -------------------------------------------------------------


@dataclass
class OneTypeFit:
    """Alternating least-squares fit of dG = phi*(G + C)."""

    phi: np.ndarray
    C: np.ndarray
    residuals: np.ndarray
    residual: float
    is_pointwise_1_type: bool
    first_kind: bool
    proper: bool
    iterations: int

    @property
    def C_norm(self) -> float:
        return float(np.linalg.norm(self.C))


def _als_once(G, dG, C0, max_iter, rtol):
    C = C0.copy()
    phi = np.zeros(G.shape[0])
    for it in range(1, max_iter + 1):
        base = G + C
        denom = (base * base).sum(axis=-1)
        phi = np.where(denom > 1e-300, (dG * base).sum(axis=-1) / denom, 0.0)
        s = (phi * phi).sum()
        C_new = (phi[:, None] * (dG - phi[:, None] * G)).sum(axis=0) / max(s, 1e-300)
        delta = np.linalg.norm(C_new - C)
        C = C_new
        if delta <= rtol * (1.0 + np.linalg.norm(C)):
            break
    return phi, C, it


def pointwise_one_type_fit(
    G: np.ndarray,
    dG: np.ndarray,
    tol: float = 1e-5,
    proper_tol: float = 1e-3,
    max_iter: int = 200,
    restarts: int = 0,
    seed: int = 0,
    degenerate_tol: float = 1e-9,
) -> OneTypeFit:
    """Fit per-sample factors phi_i and one constant bivector C.

    Alternating minimization: with C fixed each phi_i has a closed form;
    with phi fixed C is a linear least-squares solve.  Initialized at C = 0
    (optionally with random restarts).  Residuals are Euclidean, scaled by
    1 + ||dG_i||; the fit verdict compares their max against `tol`.
    """
    G = np.asarray(G, dtype=float).reshape(-1, 6)
    dG = np.asarray(dG, dtype=float).reshape(-1, 6)
    if G.shape[0] < 8:
        raise ValueError("need at least 8 samples in general position")
    dg_norm = np.linalg.norm(dG, axis=-1)
    if dg_norm.max() <= degenerate_tol:
        raise DegenerateFitError(
            "all Laplacian samples vanish; harmonic edge case is not classified"
        )

    starts = [np.zeros(6)]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(rng.normal(scale=np.abs(dG).max(), size=6))

    best = None
    for C0 in starts:
        phi, C, iters = _als_once(G, dG, C0, max_iter, 1e-14)
        residuals = np.linalg.norm(dG - phi[:, None] * (G + C), axis=-1) / (1.0 + dg_norm)
        res = float(residuals.max())
        if best is None or res < best[-1]:
            best = (phi, C, residuals, iters, res)
    phi, C, residuals, iters, res = best

    mean_abs = float(np.abs(phi).mean())
    proper = bool(np.std(phi) > proper_tol * max(mean_abs, 1e-300))
    return OneTypeFit(
        phi=phi, C=C, residuals=residuals, residual=res,
        is_pointwise_1_type=bool(res <= tol),
        first_kind=bool(np.linalg.norm(C) <= tol),
        proper=proper,
        iterations=iters,
    )


# -- end-to-end theorem verification ---------------------------------------------------


@dataclass(frozen=True)
class TheoremTolerances:
    structural: float = 1e-6
    parallel_beta: float = 1e-6
    flat_normal_nu: float = 1e-5
    fit: float = 1e-5
    proper: float = 1e-3
    inconclusive_band: float = 10.0

    def as_dict(self):
        from dataclasses import asdict

        return asdict(self)


@dataclass
class TheoremReport:
    """Verdicts and statistics for the parallel-H / pointwise-1-type check."""

    surface_hash: str
    grid: tuple
    tolerances: dict
    beta_stat: float
    nu_stat: float
    fit_residual: float
    fit_C_norm: float
    phi_vs_minus_2K: float
    parallel_H: bool
    flat_normal_connection: bool
    pointwise_1_type: bool
    proper: bool
    agreement: bool
    inconclusive: list
    n_points: int
    n_poisoned: int

    def as_dict(self):
        return {
            "surface_hash": self.surface_hash,
            "grid": list(self.grid),
            "tolerances": dict(self.tolerances),
            "statistics": {
                "max_abs_beta": self.beta_stat,
                "max_abs_nu": self.nu_stat,
                "fit_max_residual": self.fit_residual,
                "fit_C_norm": self.fit_C_norm,
                "phi_vs_minus_2K_max_rel": self.phi_vs_minus_2K,
            },
            "verdicts": {
                "parallel_H": self.parallel_H,
                "flat_normal_connection": self.flat_normal_connection,
                "pointwise_1_type": self.pointwise_1_type,
                "proper": self.proper,
                "agreement": self.agreement,
            },
            "inconclusive": list(self.inconclusive),
            "n_points": self.n_points,
            "n_poisoned": self.n_poisoned,
        }


def _dominant_reason_error(field: InvariantField):
    reasons = field.reason[field.poisoned]
    if reasons.size == 0:
        return NotMarginallyTrappedError("no valid points")
    code = int(np.bincount(reasons).argmax())
    exc = {
        REASON_NOT_SPACELIKE: NotSpacelikeError,
        REASON_FLAT: FlatPointError,
        REASON_UMBILIC: UmbilicalError,
        REASON_NOT_MT: NotMarginallyTrappedError,
    }.get(code, NotMarginallyTrappedError)
    return exc(f"surface rejected: {field.poison_summary()}")


def verify_main_theorem(
    surface: SurfaceDef,
    grid=(21, 21),
    tolerances: TheoremTolerances | None = None,
    raise_inconclusive: bool = False,
) -> TheoremReport:
    """Check that the parallel-H verdict and the pointwise-1-type fit agree.

    The fit consumes the closed-form Laplacian so that its tolerances are
    not polluted by stencil error; the three-way Laplacian agreement is a
    separate check.  Surfaces whose grid is dominated by flat or otherwise
    invalid points are rejected up front.
    """
    tols = tolerances or TheoremTolerances()
    field = build_invariant_field(surface, grid=grid, tol=tols.structural)
    ok = field.valid
    if ok.sum() < 8 or ok.sum() < 0.5 * ok.size:
        raise _dominant_reason_error(field)

    beta_stat = float(
        np.maximum(np.abs(field.beta1[ok]), np.abs(field.beta2[ok])).max()
    )
    nu_stat = float(np.abs(field.nu[ok]).max())
    parallel = beta_stat <= tols.parallel_beta
    flat_normal = nu_stat <= tols.flat_normal_nu

    G = gauss_map(field.frame())[ok]
    dG = laplacian_closed_form(field.invariants(), field.frame())[ok]
    try:
        fit = pointwise_one_type_fit(G, dG, tol=tols.fit, proper_tol=tols.proper)
        fit_res, c_norm = fit.residual, fit.C_norm
        one_type, proper = fit.is_pointwise_1_type, fit.proper
        K = field.gauss_curvature[ok]
        phi_err = float(np.max(np.abs(fit.phi + 2.0 * K) / (1.0 + np.abs(2.0 * K))))
    except DegenerateFitError:
        raise

    inconclusive = []
    band = tols.inconclusive_band
    for name, stat, thresh in (
        ("parallel_H", beta_stat, tols.parallel_beta),
        ("pointwise_1_type", fit_res, tols.fit),
    ):
        if thresh / band < stat < thresh * band:
            inconclusive.append(name)

    report = TheoremReport(
        surface_hash=surface.content_hash(),
        grid=tuple(grid),
        tolerances=tols.as_dict(),
        beta_stat=beta_stat,
        nu_stat=nu_stat,
        fit_residual=fit_res,
        fit_C_norm=c_norm,
        phi_vs_minus_2K=phi_err,
        parallel_H=parallel,
        flat_normal_connection=flat_normal,
        pointwise_1_type=one_type,
        proper=proper,
        agreement=parallel == one_type,
        inconclusive=inconclusive,
        n_points=int(ok.size),
        n_poisoned=field.n_poisoned,
    )
    if raise_inconclusive and inconclusive:
        raise InconclusiveToleranceError(
            f"verdict statistics within a decade of their thresholds: {inconclusive}"
        )
    return report


# -- bundled per-grid analysis ---------------------------------------------------------


@dataclass
class GaussAnalysis:
    """Per-point Gauss map data plus the global fit, for reports."""

    field: InvariantField
    G: np.ndarray
    dG_numeric: np.ndarray
    dG_closed: np.ndarray
    dG_expanded: np.ndarray
    fit: OneTypeFit | None = dc_field(default=None)

    @property
    def valid(self):
        return self.field.stencil_all_valid()

    def disagreements(self) -> dict:
        ok = self.valid
        out = {}
        for name, A, B in (
            ("numeric_vs_closed", self.dG_numeric, self.dG_closed),
            ("expanded_vs_closed", self.dG_expanded, self.dG_closed),
            ("numeric_vs_expanded", self.dG_numeric, self.dG_expanded),
        ):
            d = relative_disagreement(A, B)[ok]
            d = d[np.isfinite(d)]
            out[name] = float(d.max()) if d.size else math.nan
        return out


def analyze_gauss_map(
    surface: SurfaceDef,
    grid=(11, 11),
    h: float | None = None,
    tol: float = 1e-6,
    fit_tol: float = 1e-5,
) -> GaussAnalysis:
    field = build_invariant_field(surface, grid=grid, h=h, tol=tol)
    frame = field.frame()
    G = gauss_map(frame)
    analysis = GaussAnalysis(
        field=field,
        G=G,
        dG_numeric=laplacian_numeric_field(field),
        dG_closed=laplacian_closed_form(field.invariants(), frame),
        dG_expanded=laplacian_expanded(field),
    )
    ok = analysis.valid
    if ok.sum() >= 8:
        try:
            analysis.fit = pointwise_one_type_fit(
                G[ok], analysis.dG_closed[ok], tol=fit_tol
            )
        except DegenerateFitError:
            analysis.fit = None
    return analysis
