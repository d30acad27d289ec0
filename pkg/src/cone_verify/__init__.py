"""Numerical cone-field and quadratic-form criteria for smooth flows.

Certifies separation of the derivative cocycle by indefinite quadratic
forms, monotonicity of the projected (normal-bundle) cocycle, growth and
quotient inequalities along orbits, and extracts/classifies the invariant
splitting the criteria imply.
"""

__version__ = "0.1.0"

from .qforms import (
    ConeClass,
    QuadraticFormField,
    cone_membership,
    evaluate,
    j_adjoint,
    lagrange_normalize,
    parse_form_spec,
    pseudo_gram_schmidt,
    pseudo_orthogonal_complement,
)
from .fields import (
    Ball,
    Box,
    VectorFieldModel,
    builtin,
    builtin_catalog,
    jacobian_ad,
    parse_expression,
    parse_field,
)
from .separation import (
    LPFVerdict,
    MonotonicityCertificate,
    SeparationCertificate,
    Verdict,
    check_lpf_monotonicity,
    check_separation,
    delta_interval,
    derivative_residual,
    hat_j,
    tilde_j,
)
from .cocycle import (
    DeltaArea,
    TrajectoryCocycle,
    cone_invariance_test,
    delta_area,
    integrate_cocycle,
    integrate_flow,
    verify_growth_bound,
    verify_quotient_bound,
)
from .splitting import (
    BundleEvidence,
    JPolarDecomposition,
    SplittingClass,
    SplittingEstimate,
    SplittingSample,
    build_adapted_form,
    check_sectional_expansion,
    classify_region,
    classify_splitting,
    cone_image_contraction,
    dual_form_hyperbolicity,
    estimate_domination,
    extract_bundles,
    flow_direction_check,
    j_polar_decompose,
    sigma_d,
)
from .sampling import RegionSamplingPlan, sample_region
from . import errors

__all__ = [name for name in dir() if not name.startswith("_")]
