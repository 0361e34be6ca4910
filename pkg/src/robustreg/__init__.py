"""Worst-case-over-a-ball regularization toolkit.

Core workflow: build a function/domain model (``funcmodel``), compute its
worst-case envelope over radius-eps balls (``regularize``), estimate calmness
and Lipschitz moduli of the function or its envelope (``moduli``), certify
norm/quadratic envelopes against linear matrix inequalities (``sdpcert``),
compute perturbed spectral quantities (``pseudospec``), and diagnose the
set geometry that governs envelope regularity (``geomsets``).
"""

__version__ = "0.1.0"

from .exprlang import (
    ExpressionDomainError,
    ExpressionSyntaxError,
    ExpressionTree,
    evaluate,
    evaluate_many,
    format_expression,
    parse_expression,
)
from .funcmodel import (
    AffineNormModel,
    BallDomain,
    BoxDomain,
    CallableModel,
    DomainModel,
    DyadicEpigraphDomain,
    ExpressionModel,
    Fixture,
    FullSpaceDomain,
    FunctionModel,
    Piecewise1DModel,
    PolytopeDomain,
    QuadraticModel,
    SmoothEqualityDomain,
    SpectralAbscissaModel,
    SpectralRadiusModel,
    UnionDomain,
    fixture_names,
    load_fixture,
)
from .regularize import (
    RadiusSpec,
    RobustProfile,
    SearchConfig,
    epsilon_profile,
    make_robust_evaluator,
    robust_value,
    robust_value_affine_norm,
    robust_value_piecewise1d,
    robust_value_quadratic,
    robust_value_search,
)
from .moduli import (
    AgreementReport,
    ModulusEstimate,
    OneOverEpsReport,
    SubgradientInterval,
    calm_direct,
    calm_from_profile,
    calm_lip_agreement_report,
    lip_direct,
    lip_via_calm_limsup,
    o_one_over_eps_report,
    subgradient_interval,
)
from .pseudospec import (
    PseudospectrumQuery,
    PseudospectrumResult,
    pseudospectral_abscissa,
    pseudospectral_radius,
    pseudospectral_value,
    sigma_min_resolvent,
    spectral_abscissa,
    spectral_epsilon_profile,
    spectral_radius,
)
from .sdpcert import (
    BlockSymMatrix,
    NormLMIInstance,
    QuadLMIInstance,
    build_norm_lmi,
    build_quad_lmi,
    export_sdpa,
    feasible_norm,
    feasible_quad,
    parse_sdpa,
    robust_value_via_norm_lmi,
    robust_value_via_quad_lmi,
)
from .geomsets import (
    PointCloud,
    cone_contains,
    cone_distance,
    hausdorff_distance,
    lip_upper_bound_check,
    nearly_convex_profile,
    nearly_radial_profile,
    normal_cone,
    normal_cone_lip_bound,
    peaceful_profile,
    polar_cone,
    prox_regular_profile,
    sample_ball_intersection,
    setmap_lip_estimate,
    tangent_cone,
)
