from sphere_sw.bench import BenchRunner, Problem, build_problem, epsilon_sweep, run_experiment
from sphere_sw.config import ExperimentConfig, MethodSpec, ProblemSpec, ReferenceSpec, load_config
from sphere_sw.data import (
    banana_map,
    gen_banana_sample,
    gen_gaussian_pair,
    load_point_cloud,
    save_point_cloud,
)
from sphere_sw.dpp import (
    HarmonicKernel,
    LegendreProductKernel,
    harmonic_ensemble_kernel,
    nodes_harmonic,
    nodes_ope,
    ope_spherical_kernel,
    sample_projection_dpp,
)
from sphere_sw.estimators import (
    cv_low,
    cv_up,
    is_estimate,
    mc_mean,
    ols_cv_estimate,
    repelled_estimate,
    shcv_controls,
)
from sphere_sw.exceptions import (
    BasisConstructionError,
    ConfigError,
    ControlVariateError,
    DimensionError,
    EstimatorError,
    HarmonicsError,
    MeasureError,
    NumericalDegeneracyError,
    PointCloudFormatError,
    QuadratureError,
    RejectionBudgetError,
    SpectralError,
    SphereDomainError,
    SphereSWError,
    SphereSWWarning,
    TransportError,
    UnknownMethodError,
)
from sphere_sw.harmonics import (
    FundamentalSet,
    HarmonicBasis,
    build_basis,
    build_fundamental_set,
    eval_basis,
    gegenbauer_eval,
    harmonic_dim,
    harmonic_dims,
    jacobi_eval,
    zonal_kernel,
)
from sphere_sw.measure import DiscreteMeasure, Projected1D
from sphere_sw.nodes import QuadratureNodes
from sphere_sw.quadratures import (
    make_nodes,
    nodes_grid_circle,
    nodes_iid,
    nodes_isvmf,
    nodes_poisson,
    nodes_spiral_sphere,
    nodes_unifortho,
    repel,
    sample_cue_circle,
    sample_spherical_ensemble,
)
from sphere_sw.report import ExperimentReporter, Report, ReportRow
from sphere_sw.result import ControlFamily, EstimatorDiagnostics, EstimatorResult
from sphere_sw.spectral import (
    SpectralProfile,
    VariancePrediction,
    alpha_coeff,
    funk_transform_numeric,
    lambda_coeff,
    spectral_profile,
    unifortho_variance_predict,
)
from sphere_sw.sphere import (
    OrthogonalFrame,
    Seed,
    apply_random_rotation,
    sample_haar_orthogonal,
    sample_uniform_sphere,
    spherical_coords_map,
    stereographic_inverse,
)
from sphere_sw.stats import (
    Interval,
    SampleSummary,
    bonferroni,
    ci_mean_gaussian,
    ci_variance_chi2,
    summarize,
)
from sphere_sw.transport import SWIntegrand, estimate_sw, project_measure, sw_integrand, wasserstein_1d

__all__ = [
    "BasisConstructionError",
    "BenchRunner",
    "ConfigError",
    "ControlFamily",
    "ControlVariateError",
    "DimensionError",
    "DiscreteMeasure",
    "EstimatorDiagnostics",
    "EstimatorError",
    "EstimatorResult",
    "ExperimentConfig",
    "ExperimentReporter",
    "FundamentalSet",
    "HarmonicBasis",
    "HarmonicKernel",
    "HarmonicsError",
    "Interval",
    "LegendreProductKernel",
    "MeasureError",
    "MethodSpec",
    "NumericalDegeneracyError",
    "OrthogonalFrame",
    "PointCloudFormatError",
    "Problem",
    "ProblemSpec",
    "Projected1D",
    "QuadratureError",
    "QuadratureNodes",
    "ReferenceSpec",
    "RejectionBudgetError",
    "Report",
    "ReportRow",
    "SWIntegrand",
    "SampleSummary",
    "Seed",
    "SpectralError",
    "SpectralProfile",
    "SphereDomainError",
    "SphereSWError",
    "SphereSWWarning",
    "TransportError",
    "UnknownMethodError",
    "VariancePrediction",
    "alpha_coeff",
    "apply_random_rotation",
    "banana_map",
    "bonferroni",
    "build_basis",
    "build_fundamental_set",
    "build_problem",
    "ci_mean_gaussian",
    "ci_variance_chi2",
    "cv_low",
    "cv_up",
    "epsilon_sweep",
    "estimate_sw",
    "eval_basis",
    "funk_transform_numeric",
    "gegenbauer_eval",
    "gen_banana_sample",
    "gen_gaussian_pair",
    "harmonic_dim",
    "harmonic_dims",
    "harmonic_ensemble_kernel",
    "is_estimate",
    "jacobi_eval",
    "lambda_coeff",
    "load_config",
    "load_point_cloud",
    "make_nodes",
    "mc_mean",
    "nodes_grid_circle",
    "nodes_harmonic",
    "nodes_iid",
    "nodes_isvmf",
    "nodes_ope",
    "nodes_poisson",
    "nodes_spiral_sphere",
    "nodes_unifortho",
    "ols_cv_estimate",
    "ope_spherical_kernel",
    "project_measure",
    "repel",
    "repelled_estimate",
    "run_experiment",
    "sample_cue_circle",
    "sample_haar_orthogonal",
    "sample_projection_dpp",
    "sample_spherical_ensemble",
    "sample_uniform_sphere",
    "save_point_cloud",
    "shcv_controls",
    "spectral_profile",
    "spherical_coords_map",
    "stereographic_inverse",
    "summarize",
    "sw_integrand",
    "unifortho_variance_predict",
    "wasserstein_1d",
    "zonal_kernel",
]
