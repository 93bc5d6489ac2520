"""Holomorphic calculus and Monte Carlo verification of heat-kernel
inequalities on stratified complex Lie groups."""

from .algebra import (
    GroupElement,
    HorizontalFrame,
    HTypeReport,
    LawViolation,
    StratifiedAlgebra,
    StructuralError,
    abelian,
    algebra_from_brackets,
    algebra_from_spec,
    bch_product,
    bracket,
    dilate,
    euclidean_inner_product,
    filiform,
    h_type_check,
    heisenberg_weyl,
    homogeneous_norm,
    horizontal_frame,
    identity_element,
    load_group,
    validate_algebra,
)
from .estimators import (
    MCEstimate,
    PoisonedEstimateError,
    dirichlet_form,
    entropy_gap,
    inner_product,
    kde_estimate,
    lp_norm,
    lsi_ratio,
    mc_integral,
    mc_integral_extrapolated,
    mehler_apply,
    norm_ratio,
)
from .experiments import CheckRecord, ExperimentConfig, Report, janson_time, defect_bound
from .kernel import (
    KernelQuadratureConfig,
    QuadratureError,
    apply_A,
    dbar_residual,
    grad_log_rho,
    nonholomorphy_witness,
    normalization_integral,
    rho,
    rho_smoothed,
    scaling_residual,
)
from .poly import (
    HoloPoly,
    HomogeneousComponent,
    apply_B,
    constant,
    coordinate,
    dilate_pullback,
    dim_Pk,
    euler_Z,
    evaluate,
    fejer_project,
    frame_derivatives,
    grad_sq_holo,
    h_pairing,
    homogeneous_decompose,
    left_invariant_derivative,
    monomials_of_weight,
    parse_poly,
    poly_from_json,
    poly_to_json,
    poly_to_text,
    random_homogeneous,
    random_poly,
    semigroup_B,
    xy_pair_eval,
    zero,
)
from .sampling import (
    SampleBatch,
    SamplerConfig,
    dilate_batch,
    load_batch,
    sample_heat_kernel,
    sample_heat_kernel_coupled,
    save_batch,
)

__version__ = "0.1.0"
