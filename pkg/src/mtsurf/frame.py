"""Moving frames of marginally trapped points and their invariant functions.

For a marginally trapped, non-flat point the frame is {x, y, n1, n2} with x,
y unit tangents along the two principal directions, n1 the (lightlike) mean
curvature vector, and n2 the unique lightlike normal with <n1, n2> = -1.
Seven scalar functions (nu, lam, mu, gamma1, gamma2, beta1, beta2) describe
the frame's derivative behaviour; the Gauss and normal curvatures are
K = 2*lam*mu and kappa = -2*mu*nu.

Grid fields carry a sign-alignment sweep so the frame varies continuously,
which is what makes the finite-difference derivative checks meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .dsl import SurfaceDef
from .errors import (
    FlatPointError,
    NotMarginallyTrappedError,
    NotSpacelikeError,
    StencilOutsideDomainError,
    UmbilicalError,
)
from .jets import Jet, eval_jet, eval_jet_grid
from .minkowski import det4, inner
from .shape import (
    FirstForm,
    SecondForm,
    first_fundamental,
    jet_quads,
    mean_curvature_core,
    normals_core,
    qdot,
    qval,
    second_fundamental,
    sigma_and_christoffels,
    spacelike_mask,
    taylor_shift_quad,
)

REASON_OK = 0
REASON_NOT_SPACELIKE = 1
REASON_FLAT = 2
REASON_UMBILIC = 3
REASON_NOT_MT = 4
REASON_ALIGN = 5
REASON_STENCIL = 6

REASON_NAMES = {
    REASON_OK: "ok",
    REASON_NOT_SPACELIKE: "not_spacelike",
    REASON_FLAT: "flat_point",
    REASON_UMBILIC: "umbilical",
    REASON_NOT_MT: "not_marginally_trapped",
    REASON_ALIGN: "alignment_failed",
    REASON_STENCIL: "stencil_member_invalid",
}

FULL_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))
HALF_OFFSETS = ((0.5, 0), (-0.5, 0), (0, 0.5), (0, -0.5))
CORNER_OFFSETS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
ALL_OFFSETS = FULL_OFFSETS + HALF_OFFSETS + CORNER_OFFSETS


# -- principal directions -------------------------------------------------------


def _principal_masked(E, F, G, L, M, N, tol):
    """Both principal direction coefficient pairs, I-normalized, canonically
    signed and ordered.  Returns (d1, d2, flat_mask, umbilic_mask)."""
    A = E * M - F * L
    B = E * N - G * L
    C = F * N - G * M
    ref = (np.abs(E) + np.abs(F) + np.abs(G)) * np.sqrt(L * L + M * M + N * N)
    coeff_mag = np.maximum(np.maximum(np.abs(A), np.abs(B)), np.abs(C))
    flat = coeff_mag <= tol * (ref + 1e-300)

    disc = B * B - 4 * A * C
    umb = ~flat & (disc <= tol * (ref + 1e-300) ** 2)

    with np.errstate(all="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        qq = -0.5 * (B + np.where(B >= 0, 1.0, -1.0) * sq)
        # branch on which leading coefficient is healthier
        use_a = np.abs(A) >= np.abs(C)
        mid = np.maximum(np.abs(A), np.abs(C)) <= 1e-14 * np.abs(B)

        t1 = np.where(use_a, qq / A, np.where(qq != 0, A / qq, 0.0))
        t2 = np.where(use_a, np.where(qq != 0, C / qq, 0.0), qq / C)
        # use_a: roots t = lam/mu, directions (t, 1); else s = mu/lam, (1, s)
        d1 = np.where(use_a[..., None],
                      np.stack([t1, np.ones_like(t1)], axis=-1),
                      np.stack([np.ones_like(t1), t1], axis=-1))
        d2 = np.where(use_a[..., None],
                      np.stack([t2, np.ones_like(t2)], axis=-1),
                      np.stack([np.ones_like(t2), t2], axis=-1))
        # both leading coefficients tiny: the quadratic is B*lam*mu = 0
        d1 = np.where(mid[..., None], np.array([1.0, 0.0]), d1)
        d2 = np.where(mid[..., None], np.array([0.0, 1.0]), d2)

        def normalize(d):
            lam_c, mu_c = d[..., 0], d[..., 1]
            n = np.sqrt(E * lam_c**2 + 2 * F * lam_c * mu_c + G * mu_c**2)
            d = d / n[..., None]
            lam_c, mu_c = d[..., 0], d[..., 1]
            mag = np.abs(lam_c) + np.abs(mu_c)
            lam_zero = np.abs(lam_c) <= 1e-12 * mag
            s = np.where(lam_zero, np.sign(mu_c), np.sign(lam_c))
            return d * np.where(s == 0, 1.0, s)[..., None]

        d1 = normalize(d1)
        d2 = normalize(d2)

        # deterministic order: larger z_u coefficient first, ties by z_v
        mag = np.abs(d1) + np.abs(d2)
        tie = np.abs(d1[..., 0] - d2[..., 0]) <= 1e-12 * mag[..., 0]
        swap = np.where(tie, d2[..., 1] > d1[..., 1], d2[..., 0] > d1[..., 0])
        d1s = np.where(swap[..., None], d2, d1)
        d2s = np.where(swap[..., None], d1, d2)
    return d1s, d2s, flat, umb


def principal_directions(first: FirstForm, second: SecondForm, tol: float = 1e-9):
    """The two principal tangent directions as (lambda, mu) coefficient pairs
    against (z_u, z_v), each of unit length in the first fundamental form."""
    d1, d2, flat, umb = _principal_masked(
        first.E, first.F, first.G, second.L, second.M, second.N, tol
    )
    if np.any(flat):
        raise FlatPointError("principal directions undefined at a flat point")
    if np.any(umb):
        raise UmbilicalError("principal directions degenerate (discriminant <= 0)")
    return d1, d2


# -- geometric frame --------------------------------------------------------------


@dataclass(frozen=True)
class GeometricFrame:
    """Frame vectors (..., 4) plus the tangent coefficients of x and y."""

    x: np.ndarray
    y: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    x_coeffs: np.ndarray
    y_coeffs: np.ndarray
    u: np.ndarray
    v: np.ndarray


@dataclass
class _FrameBatch:
    x: np.ndarray
    y: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    x_coeffs: np.ndarray
    y_coeffs: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    valid: np.ndarray
    reason: np.ndarray
    freeze: dict


def dual_null_normal(H, n1hat, n2hat, branch=None):
    """The lightlike normal n2 with <H, n2> = -1, resolved in the orthonormal
    normal basis.  `branch` freezes which null ray H is taken to lie along."""
    alpha = inner(H, n1hat)
    beta = -inner(H, n2hat)
    p = 0.5 * (alpha + beta)
    q = 0.5 * (alpha - beta)
    if branch is None:
        branch = np.abs(p) >= np.abs(q)
    ell_plus = n1hat + n2hat
    ell_minus = n1hat - n2hat
    with np.errstate(all="ignore"):
        n2_p = -ell_minus / (2 * p[..., None])
        n2_q = -ell_plus / (2 * q[..., None])
        n2 = np.where(branch[..., None], n2_p, n2_q)
    off_ray = np.where(branch, np.abs(q), np.abs(p))
    scale = np.abs(p) + np.abs(q)
    return n2, branch, off_ray, scale


def _as_batched(jet: Jet) -> Jet:
    if jet.batch_shape != ():
        return jet
    return Jet(
        order=jet.order,
        d={k: v[None] for k, v in jet.d.items()},
        u=np.atleast_1d(jet.u),
        v=np.atleast_1d(jet.v),
    )


def _frames_masked(jet: Jet, tol: float = 1e-9, freeze: dict | None = None) -> _FrameBatch:
    """Construct frames and algebraic invariants for every lane, recording a
    per-lane validity mask instead of raising."""
    jet = _as_batched(jet)
    freeze = freeze or {}
    q = jet_quads(jet)
    zu_q, zv_q = q[(1, 0)], q[(0, 1)]
    zu, zv = jet.zu, jet.zv

    ok = np.atleast_1d(spacelike_mask(jet, tol))
    reason = np.where(ok, REASON_OK, REASON_NOT_SPACELIKE).astype(np.int8)

    with np.errstate(all="ignore"):
        E = inner(zu, zu)
        F = inner(zu, zv)
        G = inner(zv, zv)
        n1hat_q, n2hat_q, cand, osign = normals_core(
            zu_q, zv_q, freeze.get("candidate"), freeze.get("orient_sign")
        )
        n1hat, n2hat = qval(n1hat_q), qval(n2hat_q)
        W = np.sqrt(np.maximum(E * G - F * F, 0.0))
        keys = ((2, 0), (1, 1), (0, 2))
        c1 = np.stack([inner(jet.d[k], n1hat) for k in keys], axis=-1)
        c2 = np.stack([inner(jet.d[k], n2hat) for k in keys], axis=-1)
        L = 2.0 / W * (c1[..., 0] * c2[..., 1] - c1[..., 1] * c2[..., 0])
        M = 1.0 / W * (c1[..., 0] * c2[..., 2] - c1[..., 2] * c2[..., 0])
        N = 2.0 / W * (c1[..., 1] * c2[..., 2] - c1[..., 2] * c2[..., 1])

        d1, d2, flat, umb = _principal_masked(E, F, G, L, M, N, tol)
        flat = np.atleast_1d(flat)
        umb = np.atleast_1d(umb)
        reason = np.where(ok & flat, REASON_FLAT, reason)
        reason = np.where(ok & ~flat & umb, REASON_UMBILIC, reason)

        sigmas, _ = sigma_and_christoffels(jet)
        H = qval(mean_curvature_core(zu_q, zv_q, *sigmas))
        hh = inner(H, H)
        h_sq = (H * H).sum(axis=-1)
        sec_scale = 1.0 + sum((jet.d[k] ** 2).sum(axis=-1) for k in keys)
        mt = np.atleast_1d(
            (np.abs(hh) <= tol * (1.0 + h_sq)) & (h_sq > tol * sec_scale)
        )
        reason = np.where(ok & ~flat & ~umb & ~mt, REASON_NOT_MT, reason)

        n2, branch, off_ray, nscale = dual_null_normal(H, n1hat, n2hat, freeze.get("null_branch"))
        mt &= np.atleast_1d(off_ray <= np.sqrt(tol) * (nscale + 1e-300))

        x = d1[..., 0, None] * zu + d1[..., 1, None] * zv
        y = d2[..., 0, None] * zu + d2[..., 1, None] * zv
        rows = np.stack([x, y, H, n2], axis=-2)
        flip = det4(rows) < 0
        y = np.where(np.atleast_1d(flip)[..., None], -y, y)
        d2 = np.where(np.atleast_1d(flip)[..., None], -d2, d2)

        # algebraic invariants from sigma against the null pair
        a, b = d1[..., 0], d1[..., 1]
        c, d = d2[..., 0], d2[..., 1]
        sig_uu, sig_uv, sig_vv = (qval(s) for s in sigmas)

        def sig(p1, q1, p2, q2):
            return (
                (p1 * p2)[..., None] * sig_uu
                + (p1 * q2 + q1 * p2)[..., None] * sig_uv
                + (q1 * q2)[..., None] * sig_vv
            )

        s_xx = sig(a, b, a, b)
        s_yy = sig(c, d, c, d)
        s_xy = sig(a, b, c, d)
        nu = -0.5 * inner(s_xx - s_yy, n2)
        lam = -inner(s_xy, n2)
        mu = -inner(s_xy, H)

        beta1, beta2 = _betas(jet, d1, d2, n2)

    valid = ok & ~flat & ~umb & mt
    return _FrameBatch(
        x=x, y=y, n1=H, n2=n2,
        x_coeffs=d1, y_coeffs=d2,
        nu=nu, lam=lam, mu=mu, beta1=beta1, beta2=beta2,
        valid=valid, reason=reason,
        freeze={"candidate": cand, "orient_sign": osign, "null_branch": branch},
    )


def _betas(jet: Jet, d1, d2, n2):
    """beta1 = -<D'_x H, n2>, beta2 = -<D'_y H, n2> with the H-field
    differentiated analytically through order-3 jets."""
    zu_t = taylor_shift_quad(jet, 1, 0, 1)
    zv_t = taylor_shift_quad(jet, 0, 1, 1)
    sig_t = []
    for key in ((2, 0), (1, 1), (0, 2)):
        i, j = key
        w = taylor_shift_quad(jet, i, j, 1)
        E_t = qdot(zu_t, zu_t)
        F_t = qdot(zu_t, zv_t)
        G_t = qdot(zv_t, zv_t)
        det = E_t * G_t - F_t * F_t
        p = qdot(w, zu_t)
        qv = qdot(w, zv_t)
        at = (G_t * p - F_t * qv) / det
        bt = (E_t * qv - F_t * p) / det
        sig_t.append([w[k] - at * zu_t[k] - bt * zv_t[k] for k in range(4)])
    H_t = mean_curvature_core(zu_t, zv_t, *sig_t)
    dHu = np.stack([t.partial(1, 0) for t in H_t], axis=-1)
    dHv = np.stack([t.partial(0, 1) for t in H_t], axis=-1)
    dH_x = d1[..., 0, None] * dHu + d1[..., 1, None] * dHv
    dH_y = d2[..., 0, None] * dHu + d2[..., 1, None] * dHv
    return -inner(dH_x, n2), -inner(dH_y, n2)


def geometric_frame(jet: Jet, tol: float = 1e-9) -> GeometricFrame:
    """Frame at a single point or batch; raises on any invalid lane."""
    fb = _frames_masked(jet, tol)
    if not np.all(fb.valid):
        code = int(fb.reason[np.atleast_1d(~fb.valid)][0])
        exc = {
            REASON_NOT_SPACELIKE: NotSpacelikeError,
            REASON_FLAT: FlatPointError,
            REASON_UMBILIC: UmbilicalError,
            REASON_NOT_MT: NotMarginallyTrappedError,
        }.get(code, NotMarginallyTrappedError)
        raise exc(f"frame undefined: {REASON_NAMES.get(code, code)}")
    if jet.batch_shape == ():
        return GeometricFrame(
            x=fb.x[0], y=fb.y[0], n1=fb.n1[0], n2=fb.n2[0],
            x_coeffs=fb.x_coeffs[0], y_coeffs=fb.y_coeffs[0],
            u=jet.u, v=jet.v,
        )
    return GeometricFrame(
        x=fb.x, y=fb.y, n1=fb.n1, n2=fb.n2,
        x_coeffs=fb.x_coeffs, y_coeffs=fb.y_coeffs,
        u=jet.u, v=jet.v,
    )


def frame_constraint_residuals(frame: GeometricFrame) -> dict:
    """The defining inner-product conditions, as absolute residuals."""
    x, y, n1, n2 = frame.x, frame.y, frame.n1, frame.n2
    res = {
        "xx": inner(x, x) - 1.0,
        "yy": inner(y, y) - 1.0,
        "xy": inner(x, y),
        "xn1": inner(x, n1),
        "xn2": inner(x, n2),
        "yn1": inner(y, n1),
        "yn2": inner(y, n2),
        "n1n1": inner(n1, n1),
        "n2n2": inner(n2, n2),
        "n1n2": inner(n1, n2) + 1.0,
    }
    rows = np.stack([x, y, n1, n2], axis=-2)
    res["orientation_det"] = det4(rows)
    return res


# -- frame alignment ---------------------------------------------------------------

# orientation-preserving sign/swap transforms of the tangent pair
_TRANSFORMS = (
    (1, 0),   # (x, y)
    (-1, 0),  # (-x, -y)
    (1, 1),   # (y, -x)
    (-1, 1),  # (-y, x)
)


def _apply_transform(sign, swap, x, y, xc, yc):
    if swap:
        x, y = y, -x
        xc, yc = yc, -xc
    if sign < 0:
        x, y, xc, yc = -x, -y, -xc, -yc
    return x, y, xc, yc


def _align_scores(x, y, x_ref, y_ref):
    xx = inner(x, x_ref)
    yy = inner(y, y_ref)
    yx = inner(y, x_ref)
    xy = inner(x, y_ref)
    parts = ((xx, yy), (-xx, -yy), (yx, -xy), (-yx, xy))
    scores = np.stack([sx + sy for sx, sy in parts], axis=0)
    oks = np.stack([(sx > 0) & (sy > 0) for sx, sy in parts], axis=0)
    return scores, oks


def _pick(choice, options):
    out = np.asarray(options[0])
    mask_shape_extra = out.ndim - choice.ndim
    for k in range(1, len(options)):
        mask = choice == k
        if mask_shape_extra:
            mask = mask.reshape(mask.shape + (1,) * mask_shape_extra)
        out = np.where(mask, options[k], out)
    return out


def _align_batch(fb: _FrameBatch, x_ref, y_ref):
    """Transform every lane of fb so its tangent pair aligns with the
    reference; lanes that cannot align are invalidated."""
    scores, oks = _align_scores(fb.x, fb.y, x_ref, y_ref)
    choice = np.argmax(scores, axis=0)
    ok = np.take_along_axis(oks, choice[None], axis=0)[0]

    outs = [
        _apply_transform(sign, swap, fb.x, fb.y, fb.x_coeffs, fb.y_coeffs)
        for sign, swap in _TRANSFORMS
    ]
    x = _pick(choice, [o[0] for o in outs])
    y = _pick(choice, [o[1] for o in outs])
    xc = _pick(choice, [o[2] for o in outs])
    yc = _pick(choice, [o[3] for o in outs])

    swapped = np.isin(choice, (2, 3))
    nu = np.where(swapped, -fb.nu, fb.nu)
    lam = np.where(swapped, -fb.lam, fb.lam)
    mu = np.where(swapped, -fb.mu, fb.mu)
    b1 = np.where(swapped, fb.beta2, fb.beta1)
    b2 = np.where(swapped, -fb.beta1, fb.beta2)
    neg = np.isin(choice, (1, 3))
    b1 = np.where(neg, -b1, b1)
    b2 = np.where(neg, -b2, b2)

    valid = fb.valid & ok
    reason = np.where(fb.valid & ~ok, REASON_ALIGN, fb.reason)
    return _FrameBatch(
        x=x, y=y, n1=fb.n1, n2=fb.n2, x_coeffs=xc, y_coeffs=yc,
        nu=nu, lam=lam, mu=mu, beta1=b1, beta2=b2,
        valid=valid, reason=reason, freeze=fb.freeze,
    ), choice


# -- invariants --------------------------------------------------------------------


@dataclass(frozen=True)
class Invariants:
    """The seven frame invariants at one or many points."""

    nu: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray

    @property
    def gauss_curvature(self):
        return 2.0 * self.lam * self.mu

    @property
    def normal_curvature(self):
        return -2.0 * self.mu * self.nu


@dataclass
class StencilPoint:
    """Aligned frame and algebraic invariants at one stencil offset."""

    x: np.ndarray
    y: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    x_coeffs: np.ndarray
    y_coeffs: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    valid: np.ndarray


@dataclass
class InvariantField:
    """Frames and invariants over a parameter grid, continuously aligned.

    All per-point arrays are flattened C-order over the (nu_grid, nv_grid)
    grid.  `stencil` maps step offsets (in units of h_u, h_v) to aligned
    StencilPoint data used by the derivative operations.  Poisoned lanes
    (flat, umbilic, misaligned, ...) are excluded from every aggregate.
    """

    surface: SurfaceDef
    grid_shape: tuple
    us: np.ndarray
    vs: np.ndarray
    h_u: float
    h_v: float
    tol: float
    x: np.ndarray
    y: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    x_coeffs: np.ndarray
    y_coeffs: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    poisoned: np.ndarray
    reason: np.ndarray
    stencil: dict = dc_field(repr=False, default_factory=dict)

    @property
    def valid(self):
        return ~self.poisoned

    @property
    def gauss_curvature(self):
        return 2.0 * self.lam * self.mu

    @property
    def normal_curvature(self):
        return -2.0 * self.mu * self.nu

    @property
    def n_poisoned(self) -> int:
        return int(self.poisoned.sum())

    def invariants(self) -> Invariants:
        return Invariants(self.nu, self.lam, self.mu, self.gamma1,
                          self.gamma2, self.beta1, self.beta2)

    def frame(self) -> GeometricFrame:
        return GeometricFrame(self.x, self.y, self.n1, self.n2,
                              self.x_coeffs, self.y_coeffs, self.us, self.vs)

    def poison_summary(self) -> dict:
        out = {}
        for code in np.unique(self.reason[self.poisoned]):
            out[REASON_NAMES.get(int(code), str(code))] = int(
                (self.reason[self.poisoned] == code).sum()
            )
        return out

    # directional derivatives of stencil data along the frame ------------------

    def stencil_all_valid(self):
        ok = self.valid.copy()
        for sp in self.stencil.values():
            ok &= sp.valid
        return ok

    def axis_derivative(self, getter, richardson: bool = True):
        """d/du and d/dv of a stencil quantity by central differences,
        Richardson-extrapolated once unless disabled."""
        g = lambda off: getter(self.stencil[off])
        du_full = (g((1, 0)) - g((-1, 0))) / (2 * self.h_u)
        dv_full = (g((0, 1)) - g((0, -1))) / (2 * self.h_v)
        if not richardson:
            return du_full, dv_full
        du_half = (g((0.5, 0)) - g((-0.5, 0))) / self.h_u
        dv_half = (g((0, 0.5)) - g((0, -0.5))) / self.h_v
        return (4 * du_half - du_full) / 3, (4 * dv_half - dv_full) / 3

    def frame_derivative(self, getter, richardson: bool = False):
        """D'_x and D'_y of a stencil quantity (chain rule through the
        tangent coefficients of x and y at the centre)."""
        du, dv = self.axis_derivative(getter, richardson)
        a, b = self.x_coeffs[..., 0], self.x_coeffs[..., 1]
        c, d = self.y_coeffs[..., 0], self.y_coeffs[..., 1]
        if du.ndim > a.ndim:
            a, b, c, d = (t[..., None] for t in (a, b, c, d))
        return a * du + b * dv, c * du + d * dv


def interior_grid(surface: SurfaceDef, nu_grid: int, nv_grid: int):
    """Uniform grid inset one grid step from the closed domain boundary."""
    (u0, u1), (v0, v1) = surface.domain
    us = u0 + (u1 - u0) * (np.arange(nu_grid) + 1.0) / (nu_grid + 1.0)
    vs = v0 + (v1 - v0) * (np.arange(nv_grid) + 1.0) / (nv_grid + 1.0)
    U, V = np.meshgrid(us, vs, indexing="ij")
    return U.ravel(), V.ravel()


def _align_sweep(fb: _FrameBatch, grid_shape):
    """Row-major continuity sweep: align each frame with its already swept
    neighbour (previous column, else previous row)."""
    nu_g, nv_g = grid_shape
    for iu in range(nu_g):
        for iv in range(nv_g):
            k = iu * nv_g + iv
            if not fb.valid[k]:
                continue
            if iv > 0:
                r = k - 1
            elif iu > 0:
                r = k - nv_g
            else:
                continue
            if not fb.valid[r]:
                continue
            scores, oks = _align_scores(fb.x[k], fb.y[k], fb.x[r], fb.y[r])
            c = int(np.argmax(scores))
            if not oks[c]:
                fb.valid[k] = False
                fb.reason[k] = REASON_ALIGN
                continue
            if c == 0:
                continue
            sign, swap = _TRANSFORMS[c]
            x, y, xc, yc = _apply_transform(
                sign, swap, fb.x[k], fb.y[k], fb.x_coeffs[k], fb.y_coeffs[k]
            )
            fb.x[k], fb.y[k] = x, y
            fb.x_coeffs[k], fb.y_coeffs[k] = xc, yc
            if swap:
                fb.nu[k] = -fb.nu[k]
                fb.lam[k] = -fb.lam[k]
                fb.mu[k] = -fb.mu[k]
                fb.beta1[k], fb.beta2[k] = fb.beta2[k], -fb.beta1[k]
            if sign < 0:
                fb.beta1[k] = -fb.beta1[k]
                fb.beta2[k] = -fb.beta2[k]
    return fb


def _stencil_bounds_ok(surface: SurfaceDef, us, vs, h_u, h_v):
    (u0, u1), (v0, v1) = surface.domain
    return (
        us.min() - h_u >= u0 - 1e-12 * surface.u_span
        and us.max() + h_u <= u1 + 1e-12 * surface.u_span
        and vs.min() - h_v >= v0 - 1e-12 * surface.v_span
        and vs.max() + h_v <= v1 + 1e-12 * surface.v_span
    )


def build_invariant_field(
    surface: SurfaceDef,
    grid=(21, 21),
    h: float | None = None,
    h_rel: float = 1e-3,
    tol: float = 1e-9,
    us=None,
    vs=None,
) -> InvariantField:
    """Evaluate frames and all seven invariants over an interior grid.

    `h` fixes the stencil step absolutely for both axes; otherwise each axis
    uses h_rel times its domain span.  Points where the frame is undefined
    or cannot be aligned are poisoned rather than fatal.
    """
    if us is None or vs is None:
        us, vs = interior_grid(surface, grid[0], grid[1])
        grid_shape = tuple(grid)
    else:
        us = np.atleast_1d(np.asarray(us, dtype=float))
        vs = np.atleast_1d(np.asarray(vs, dtype=float))
        grid_shape = (us.size, 1)
    h_u = float(h) if h is not None else h_rel * surface.u_span
    h_v = float(h) if h is not None else h_rel * surface.v_span
    if not _stencil_bounds_ok(surface, us, vs, h_u, h_v):
        raise StencilOutsideDomainError(
            f"stencil of step ({h_u}, {h_v}) leaves the domain"
        )

    jet = eval_jet_grid(surface, us, vs, 3)
    fb = _frames_masked(jet, tol)
    fb = _align_sweep(fb, grid_shape)

    stencil = {}
    stencil_ok = np.ones_like(fb.valid)
    for du, dv in ALL_OFFSETS:
        jets_off = eval_jet_grid(surface, us + du * h_u, vs + dv * h_v, 3)
        fb_off = _frames_masked(jets_off, tol, freeze=fb.freeze)
        fb_off, _ = _align_batch(fb_off, fb.x, fb.y)
        stencil[(du, dv)] = StencilPoint(
            x=fb_off.x, y=fb_off.y, n1=fb_off.n1, n2=fb_off.n2,
            x_coeffs=fb_off.x_coeffs, y_coeffs=fb_off.y_coeffs,
            nu=fb_off.nu, lam=fb_off.lam, mu=fb_off.mu,
            beta1=fb_off.beta1, beta2=fb_off.beta2, valid=fb_off.valid,
        )
        stencil_ok &= fb_off.valid

    valid = fb.valid & stencil_ok
    reason = np.where(fb.valid & ~stencil_ok, REASON_STENCIL, fb.reason)

    field = InvariantField(
        surface=surface, grid_shape=grid_shape, us=us, vs=vs,
        h_u=h_u, h_v=h_v, tol=tol,
        x=fb.x, y=fb.y, n1=fb.n1, n2=fb.n2,
        x_coeffs=fb.x_coeffs, y_coeffs=fb.y_coeffs,
        nu=fb.nu, lam=fb.lam, mu=fb.mu,
        gamma1=np.full(us.shape, np.nan), gamma2=np.full(us.shape, np.nan),
        beta1=fb.beta1, beta2=fb.beta2,
        poisoned=~valid, reason=reason, stencil=stencil,
    )

    with np.errstate(all="ignore"):
        dx_x, _ = field.frame_derivative(lambda sp: sp.x, richardson=True)
        _, dy_y = field.frame_derivative(lambda sp: sp.y, richardson=True)
        field.gamma1 = inner(dx_x, field.y)
        field.gamma2 = inner(dy_y, field.x)
    return field


def invariants_at(
    surface: SurfaceDef, u: float, v: float, h: float | None = None, tol: float = 1e-9
) -> Invariants:
    """All seven invariants at a single marginally trapped, non-flat point."""
    field = build_invariant_field(
        surface, h=h, tol=tol, us=np.array([u]), vs=np.array([v])
    )
    if field.poisoned[0]:
        code = int(field.reason[0])
        exc = {
            REASON_NOT_SPACELIKE: NotSpacelikeError,
            REASON_FLAT: FlatPointError,
            REASON_UMBILIC: UmbilicalError,
            REASON_NOT_MT: NotMarginallyTrappedError,
            REASON_STENCIL: FlatPointError,
        }.get(code, NotMarginallyTrappedError)
        raise exc(f"invariants undefined: {REASON_NAMES.get(code, code)}")
    return Invariants(
        nu=field.nu[0], lam=field.lam[0], mu=field.mu[0],
        gamma1=field.gamma1[0], gamma2=field.gamma2[0],
        beta1=field.beta1[0], beta2=field.beta2[0],
    )


# -- residual reports ----------------------------------------------------------------


@dataclass
class ResidualReport:
    """Per-point residual fields with aggregates over the valid lanes."""

    residuals: dict
    valid: np.ndarray

    @property
    def names(self):
        return tuple(self.residuals)

    def _masked(self, name):
        vals = self.residuals[name]
        return vals[self.valid & np.isfinite(vals)]

    def max(self, name=None):
        if name is not None:
            vals = self._masked(name)
            return float(np.abs(vals).max()) if vals.size else float("nan")
        return {n: self.max(n) for n in self.names}

    def mean(self, name=None):
        if name is not None:
            vals = self._masked(name)
            return float(np.abs(vals).mean()) if vals.size else float("nan")
        return {n: self.mean(n) for n in self.names}

    def worst(self) -> float:
        vals = [self.max(n) for n in self.names]
        return max(vals) if vals else float("nan")


def derivative_formula_residuals(field: InvariantField) -> ResidualReport:
    """Residual norms of the eight frame derivative formulas.

    The left sides differentiate the aligned frame fields with plain central
    differences (second order); the right sides are assembled from the
    invariants, whose own stencils are Richardson-extrapolated.  Halving h
    should shrink these residuals about fourfold.
    """
    x, y, n1, n2 = field.x, field.y, field.n1, field.n2
    nu, lam, mu = field.nu[..., None], field.lam[..., None], field.mu[..., None]
    g1, g2 = field.gamma1[..., None], field.gamma2[..., None]
    b1, b2 = field.beta1[..., None], field.beta2[..., None]

    rhs = {
        "x_x": g1 * y + (1 + nu) * n1,
        "x_y": -g1 * x + lam * n1 + mu * n2,
        "y_x": -g2 * y + lam * n1 + mu * n2,
        "y_y": g2 * x + (1 - nu) * n1,
        "x_n1": mu * y + b1 * n1,
        "y_n1": mu * x + b2 * n1,
        "x_n2": (1 + nu) * x + lam * y - b1 * n2,
        "y_n2": lam * x + (1 - nu) * y - b2 * n2,
    }
    getters = {"x": lambda sp: sp.x, "y": lambda sp: sp.y,
               "n1": lambda sp: sp.n1, "n2": lambda sp: sp.n2}
    residuals = {}
    with np.errstate(all="ignore"):
        for fname, getter in getters.items():
            dx_f, dy_f = field.frame_derivative(getter, richardson=False)
            residuals[f"x_{fname}"] = np.linalg.norm(dx_f - rhs[f"x_{fname}"], axis=-1)
            residuals[f"y_{fname}"] = np.linalg.norm(dy_f - rhs[f"y_{fname}"], axis=-1)
    return ResidualReport(residuals=residuals, valid=field.stencil_all_valid())


def integrability_residuals(field: InvariantField, mu_factor: float = 1.0) -> ResidualReport:
    """Residuals of the five scalar compatibility equations.

    `mu_factor` rescales the mu field everywhere (a sensitivity control:
    the equations are exact identities, so a corrupted mu must break at
    least one of them).
    """
    f = mu_factor
    with np.errstate(all="ignore"):
        x_mu, y_mu = field.frame_derivative(lambda sp: f * sp.mu, richardson=True)
        x_lam, y_lam = field.frame_derivative(lambda sp: sp.lam, richardson=True)
        x_nu, y_nu = field.frame_derivative(lambda sp: sp.nu, richardson=True)
        x_b2, _ = field.frame_derivative(lambda sp: sp.beta2, richardson=True)
        _, y_b1 = field.frame_derivative(lambda sp: sp.beta1, richardson=True)

        nu, lam, mu = field.nu, field.lam, f * field.mu
        g1, g2 = field.gamma1, field.gamma2
        b1, b2 = field.beta1, field.beta2

        residuals = {
            "x_mu": x_mu - 2 * mu * g2 - mu * b1,
            "y_mu": y_mu - 2 * mu * g1 - mu * b2,
            "x_lam_y_nu": x_lam - y_nu - 2 * lam * g2 + 2 * nu * g1 + lam * b1 - (1 + nu) * b2,
            "x_nu_y_lam": x_nu + y_lam - 2 * lam * g1 - 2 * nu * g2 - (1 - nu) * b1 + lam * b2,
            "x_b2_y_b1": x_b2 - y_b1 + 2 * nu * mu + g1 * b1 - g2 * b2,
        }
    return ResidualReport(residuals=residuals, valid=field.stencil_all_valid())
