"""mtsurf: invariants and Gauss-map analysis of spacelike surfaces in
Minkowski 4-space, with certified marginally trapped test-surface
generation."""

from . import errors
from .dsl import SurfaceDef, parse_surface, surface_text
from .jets import Jet, eval_jet, eval_jet_grid, eval_point_grid
from .minkowski import (
    BIVECTOR_PAIRS,
    BIVECTOR_SIGNS,
    causal_character,
    inner,
    inner_bivec,
    wedge,
)
from .shape import (
    FirstForm,
    PointGeometry,
    SecondForm,
    christoffels,
    classify_point,
    first_fundamental,
    intrinsic_gauss_curvature,
    mean_curvature,
    normal_connection_curvature,
    orthonormal_normals,
    point_geometry,
    second_fundamental,
)
from .frame import (
    GeometricFrame,
    InvariantField,
    Invariants,
    build_invariant_field,
    derivative_formula_residuals,
    frame_constraint_residuals,
    geometric_frame,
    integrability_residuals,
    interior_grid,
    invariants_at,
    principal_directions,
)
from .gauss import (
    GaussAnalysis,
    OneTypeFit,
    TFieldResult,
    TheoremReport,
    TheoremTolerances,
    analyze_gauss_map,
    compute_T,
    gauss_map,
    laplacian_closed_form,
    laplacian_expanded,
    laplacian_numeric,
    laplacian_numeric_field,
    pointwise_one_type_fit,
    relative_disagreement,
    verify_main_theorem,
)
from .families import (
    Certificate,
    CertificateTolerances,
    builtin_family,
    certify,
    find_parallel_H,
    solve_cmc_hyperboloid,
    solve_mt_rotational,
    solve_mt_screw,
)

__version__ = "0.1.0"

__all__ = [
    "BIVECTOR_PAIRS",
    "BIVECTOR_SIGNS",
    "Certificate",
    "CertificateTolerances",
    "FirstForm",
    "GaussAnalysis",
    "GeometricFrame",
    "InvariantField",
    "Invariants",
    "Jet",
    "OneTypeFit",
    "PointGeometry",
    "SecondForm",
    "SurfaceDef",
    "TFieldResult",
    "TheoremReport",
    "TheoremTolerances",
    "analyze_gauss_map",
    "build_invariant_field",
    "builtin_family",
    "causal_character",
    "certify",
    "christoffels",
    "classify_point",
    "compute_T",
    "derivative_formula_residuals",
    "errors",
    "eval_jet",
    "eval_jet_grid",
    "eval_point_grid",
    "find_parallel_H",
    "first_fundamental",
    "frame_constraint_residuals",
    "gauss_map",
    "geometric_frame",
    "inner",
    "inner_bivec",
    "integrability_residuals",
    "interior_grid",
    "intrinsic_gauss_curvature",
    "invariants_at",
    "laplacian_closed_form",
    "laplacian_expanded",
    "laplacian_numeric",
    "laplacian_numeric_field",
    "mean_curvature",
    "normal_connection_curvature",
    "orthonormal_normals",
    "parse_surface",
    "point_geometry",
    "pointwise_one_type_fit",
    "principal_directions",
    "relative_disagreement",
    "second_fundamental",
    "solve_cmc_hyperboloid",
    "solve_mt_rotational",
    "solve_mt_screw",
    "surface_text",
    "verify_main_theorem",
    "wedge",
]
