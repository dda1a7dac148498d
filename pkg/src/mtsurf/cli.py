"""Command-line front end.

Commands: analyze, invariants, laplacian, verify-theorem, generate, certify.
Surfaces are read from a file path or stdin ("-").  Reports are JSON (sorted
keys) or CSV with a frozen column order; every report echoes the effective
tolerances.  Exit codes: 0 success, 1 verdict failure (disagreement or an
inconclusive statistic), 2 parse or usage error, 3 geometric precondition
failure, 4 optimizer budget exhausted.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import families, frame, gauss, shape
from .dsl import parse_surface
from .errors import (
    BudgetExhaustedError,
    GeometryError,
    MtsurfError,
    ParseError,
    UnknownFamilyError,
)
from .jets import eval_jet_grid
from .minkowski import inner

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_PARSE = 2
EXIT_GEOMETRY = 3
EXIT_BUDGET = 4

INVARIANT_COLUMNS = (
    "u", "v", "nu", "lambda", "mu", "gamma1", "gamma2",
    "beta1", "beta2", "K", "kappa",
)

ANALYZE_COLUMNS = (
    "u", "v", "classification", "E", "F", "G", "W",
    "L", "M", "N", "H1", "H2", "H3", "H4", "HH_scaled",
)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _dump_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def _dump_csv(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for item in row:
            if isinstance(item, str):
                cells.append(item)
            elif isinstance(item, (bool, np.bool_)):
                cells.append("true" if item else "false")
            else:
                cells.append(repr(float(item)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _read_surface(path: str):
    if path == "-":
        return parse_surface(sys.stdin.read())
    with open(path, "r", encoding="utf-8") as fh:
        return parse_surface(fh.read())


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _parse_grid(text: str):
    try:
        nu, nv = text.lower().split("x")
        nu, nv = int(nu), int(nv)
    except ValueError:
        raise UnknownFamilyError(f"bad grid specification {text!r}")
    if nu < 1 or nv < 1:
        raise UnknownFamilyError(f"grid must be positive, got {text!r}")
    return nu, nv


def _parse_tols(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise UnknownFamilyError(f"bad tolerance override {pair!r}, expected NAME=VAL")
        name, val = pair.split("=", 1)
        out[name.strip()] = float(val)
    return out


def _apply_tols(cls, overrides: dict, **extra):
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {k: v for k, v in overrides.items() if k in names}
    kwargs.update(extra)
    return cls(**kwargs)


# -- commands -------------------------------------------------------------------------


def _cmd_analyze(args) -> int:
    surface = _read_surface(args.surface)
    nu_g, nv_g = _parse_grid(args.grid)
    tols = _parse_tols(args.tol)
    structural = tols.get("structural", 1e-9)
    us, vs = frame.interior_grid(surface, nu_g, nv_g)
    jet = eval_jet_grid(surface, us, vs, 2)
    cls = shape.classify_point(jet, structural)

    with np.errstate(all="ignore"):
        q = shape.jet_quads(jet)
        zu, zv = q[(1, 0)], q[(0, 1)]
        E = inner(jet.zu, jet.zu)
        F = inner(jet.zu, jet.zv)
        G = inner(jet.zv, jet.zv)
        det = E * G - F * F
        W = np.sqrt(np.where(det > 0, det, np.nan))
        n1h, n2h, _, _ = shape.normals_core(zu, zv)
        keys = ((2, 0), (1, 1), (0, 2))
        c1 = np.stack([inner(jet.d[k], shape.qval(n1h)) for k in keys], axis=-1)
        c2 = np.stack([inner(jet.d[k], shape.qval(n2h)) for k in keys], axis=-1)
        L = 2.0 / W * (c1[..., 0] * c2[..., 1] - c1[..., 1] * c2[..., 0])
        M = 1.0 / W * (c1[..., 0] * c2[..., 2] - c1[..., 2] * c2[..., 0])
        N = 2.0 / W * (c1[..., 1] * c2[..., 2] - c1[..., 2] * c2[..., 1])
        sigmas, _ = shape.sigma_and_christoffels(jet)
        H = shape.qval(shape.mean_curvature_core(zu, zv, *sigmas))
        hh_scaled = inner(H, H) / (1.0 + (H * H).sum(axis=-1))

    cert = families.certify(
        surface, (nu_g, nv_g), _apply_tols(families.CertificateTolerances, tols)
    )
    counts = {}
    for c in cls:
        counts[str(c)] = counts.get(str(c), 0) + 1

    if args.format == "csv":
        rows = [
            (us[i], vs[i], str(cls[i]), E[i], F[i], G[i], W[i],
             L[i], M[i], N[i], H[i, 0], H[i, 1], H[i, 2], H[i, 3], hh_scaled[i])
            for i in range(us.size)
        ]
        _write(_dump_csv(ANALYZE_COLUMNS, rows), args.out)
    else:
        payload = {
            "command": "analyze",
            "surface_hash": surface.content_hash(),
            "grid": [nu_g, nv_g],
            "tolerances": cert.tolerances,
            "classification_counts": counts,
            "certificate": cert.as_dict(),
            "points": [
                {
                    "u": us[i], "v": vs[i], "classification": str(cls[i]),
                    "first_form": [E[i], F[i], G[i], W[i]],
                    "second_form_LMN": [L[i], M[i], N[i]],
                    "H": H[i].tolist(), "HH_scaled": hh_scaled[i],
                }
                for i in range(us.size)
            ],
        }
        _write(_dump_json(payload), args.out)
    return EXIT_OK


def _cmd_invariants(args) -> int:
    surface = _read_surface(args.surface)
    nu_g, nv_g = _parse_grid(args.grid)
    tols = _parse_tols(args.tol)
    field = frame.build_invariant_field(
        surface, grid=(nu_g, nv_g), h=args.step, tol=tols.get("structural", 1e-6)
    )
    if field.n_poisoned == field.us.size:
        raise gauss._dominant_reason_error(field)

    if args.format == "csv":
        rows = [
            (field.us[i], field.vs[i], field.nu[i], field.lam[i], field.mu[i],
             field.gamma1[i], field.gamma2[i], field.beta1[i], field.beta2[i],
             field.gauss_curvature[i], field.normal_curvature[i],
             bool(field.poisoned[i]))
            for i in range(field.us.size)
        ]
        _write(_dump_csv(INVARIANT_COLUMNS + ("poisoned",), rows), args.out)
    else:
        payload = {
            "command": "invariants",
            "surface_hash": surface.content_hash(),
            "grid": [nu_g, nv_g],
            "stencil_step": [field.h_u, field.h_v],
            "tolerances": {"structural": field.tol},
            "n_poisoned": field.n_poisoned,
            "poison_summary": field.poison_summary(),
            "points": [
                {
                    "u": field.us[i], "v": field.vs[i],
                    "invariants": {
                        "nu": field.nu[i], "lambda": field.lam[i], "mu": field.mu[i],
                        "gamma1": field.gamma1[i], "gamma2": field.gamma2[i],
                        "beta1": field.beta1[i], "beta2": field.beta2[i],
                        "K": field.gauss_curvature[i],
                        "kappa": field.normal_curvature[i],
                    },
                    "poisoned": bool(field.poisoned[i]),
                }
                for i in range(field.us.size)
            ],
        }
        _write(_dump_json(payload), args.out)
    return EXIT_OK


def _cmd_laplacian(args) -> int:
    surface = _read_surface(args.surface)
    nu_g, nv_g = _parse_grid(args.grid)
    if nu_g < 5 or nv_g < 5:
        sys.stderr.write("laplacian commands need a grid of at least 5x5\n")
        return EXIT_PARSE
    tols = _parse_tols(args.tol)
    analysis = gauss.analyze_gauss_map(
        surface, grid=(nu_g, nv_g), h=args.step,
        tol=tols.get("structural", 1e-6), fit_tol=tols.get("fit", 1e-5),
    )
    field = analysis.field
    ok = analysis.valid
    dis = analysis.disagreements()

    if args.format == "csv":
        cols = (
            ("u", "v")
            + tuple(f"dG_numeric_{i}" for i in range(6))
            + tuple(f"dG_closed_{i}" for i in range(6))
            + tuple(f"dG_expanded_{i}" for i in range(6))
            + ("rel_numeric_closed", "rel_expanded_closed", "valid")
        )
        r_nc = gauss.relative_disagreement(analysis.dG_numeric, analysis.dG_closed)
        r_ec = gauss.relative_disagreement(analysis.dG_expanded, analysis.dG_closed)
        rows = [
            (field.us[i], field.vs[i],
             *analysis.dG_numeric[i], *analysis.dG_closed[i], *analysis.dG_expanded[i],
             r_nc[i], r_ec[i], bool(ok[i]))
            for i in range(field.us.size)
        ]
        _write(_dump_csv(cols, rows), args.out)
    else:
        payload = {
            "command": "laplacian",
            "surface_hash": surface.content_hash(),
            "grid": [nu_g, nv_g],
            "stencil_step": [field.h_u, field.h_v],
            "tolerances": {"structural": field.tol},
            "max_disagreements": dis,
            "n_poisoned": int((~ok).sum()),
            "points": [
                {
                    "u": field.us[i], "v": field.vs[i],
                    "G": analysis.G[i].tolist(),
                    "dG_numeric": analysis.dG_numeric[i].tolist(),
                    "dG_closed": analysis.dG_closed[i].tolist(),
                    "dG_expanded": analysis.dG_expanded[i].tolist(),
                    "valid": bool(ok[i]),
                }
                for i in range(field.us.size)
            ],
        }
        _write(_dump_json(payload), args.out)
    return EXIT_OK


def _cmd_verify_theorem(args) -> int:
    surface = _read_surface(args.surface)
    nu_g, nv_g = _parse_grid(args.grid)
    tols = _parse_tols(args.tol)
    report = gauss.verify_main_theorem(
        surface, grid=(nu_g, nv_g),
        tolerances=_apply_tols(gauss.TheoremTolerances, tols),
    )
    payload = {"command": "verify-theorem"}
    payload.update(report.as_dict())
    _write(_dump_json(payload), args.out)
    if report.agreement and not report.inconclusive:
        return EXIT_OK
    return EXIT_VERDICT


def _cmd_certify(args) -> int:
    surface = _read_surface(args.surface)
    nu_g, nv_g = _parse_grid(args.grid)
    tols = _parse_tols(args.tol)
    cert = families.certify(
        surface, (nu_g, nv_g), _apply_tols(families.CertificateTolerances, tols)
    )
    payload = {"command": "certify"}
    payload.update(cert.as_dict())
    _write(_dump_json(payload), args.out)
    return EXIT_OK


_TEMPLATE_FAMILIES = (
    "plane", "cylinder", "lightlike-graph", "light-cone-slice", "rotational", "boost",
)


def _cmd_generate(args) -> int:
    params = {}
    for pair in args.param or ():
        if "=" not in pair:
            raise UnknownFamilyError(f"bad parameter {pair!r}, expected NAME=VAL")
        name, val = pair.split("=", 1)
        try:
            params[name] = float(val)
        except ValueError:
            params[name] = val

    name = args.family
    if name in _TEMPLATE_FAMILIES:
        surface = families.builtin_family(name, params or None)
        cert = families.certify(surface)
    elif name == "mt-rotational":
        kappa = (params.pop("k0", 0.6), params.pop("k1", 0.25))
        span = params.pop("span", 1.2)
        surface, cert = families.solve_mt_rotational(span=span, kappa=kappa, **params)
    elif name == "mt-screw":
        pitch = (params.pop("p", 0.45), params.pop("q", 0.2))
        kappa = (params.pop("k0", 0.7), params.pop("k1", 0.2))
        surface, cert = families.solve_mt_screw(pitch=pitch, kappa=kappa, **params)
    elif name == "parallel-h":
        budget = int(params.pop("budget", 150))
        surface, cert = families.find_parallel_H(
            params.pop("family", "cmc-hyperboloid"), params or None, budget=budget
        )
    else:
        raise UnknownFamilyError(f"unknown generate target {name!r}")

    prefix = args.out or name
    with open(f"{prefix}.surf", "w", encoding="utf-8") as fh:
        fh.write(surface.text())
    with open(f"{prefix}.cert.json", "w", encoding="utf-8") as fh:
        fh.write(_dump_json(cert.as_dict()))
    sys.stdout.write(f"{prefix}.surf\n{prefix}.cert.json\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtsurf",
        description="Invariants and Gauss-map analysis of spacelike surfaces "
        "in Minkowski 4-space",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, surface=True):
        if surface:
            p.add_argument("surface", help="surface file path, or - for stdin")
        p.add_argument("--grid", default="21x21", help="grid resolution NUxNV")
        p.add_argument("--step", type=float, default=None,
                       help="stencil step (default: 1e-3 of each domain span)")
        p.add_argument("--tol", action="append", metavar="NAME=VAL",
                       help="tolerance override; repeatable")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized fits")

    p = sub.add_parser("analyze", help="classification and fundamental data per grid point")
    common(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("invariants", help="the seven invariants plus K and kappa per grid point")
    common(p)
    p.set_defaults(func=_cmd_invariants)

    p = sub.add_parser("laplacian", help="Gauss map Laplacian three ways per grid point")
    common(p)
    p.set_defaults(func=_cmd_laplacian)

    p = sub.add_parser("verify-theorem", help="parallel-H vs pointwise-1-type agreement report")
    common(p)
    p.set_defaults(func=_cmd_verify_theorem)

    p = sub.add_parser("certify", help="certificate statistics and verdicts")
    common(p)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("generate", help="generate a surface and its certificate")
    p.add_argument("family", help="plane|cylinder|lightlike-graph|light-cone-slice|"
                                  "rotational|boost|mt-rotational|mt-screw|parallel-h")
    p.add_argument("--param", action="append", metavar="NAME=VAL", help="family parameter")
    p.add_argument("--out", default=None, help="output file prefix")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_generate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except UnknownFamilyError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_PARSE
    except BudgetExhaustedError as exc:
        sys.stderr.write(f"budget exhausted: {exc}\n")
        return EXIT_BUDGET
    except GeometryError as exc:
        sys.stderr.write(f"geometry error: {exc}\n")
        return EXIT_GEOMETRY
    except MtsurfError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VERDICT
    except OSError as exc:
        sys.stderr.write(f"io error: {exc}\n")
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
