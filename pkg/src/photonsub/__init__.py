"""Photon-subtracted thermal states of light: photon statistics from
generating functions, homodyne quadrature and Wigner descriptions, time-domain
simulation of a cw subtraction experiment, and maximum-likelihood state
reconstruction with Fisher errors, chi^2 validation, and fidelity scoring."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    DomainError,
    EstimationError,
    FitConvergenceError,
    InsufficientDataError,
    MomentIncompatibilityError,
    PhotonSubError,
)
from .genfunc import (
    CoherentState,
    CompoundPoissonParams,
    CompoundPoissonState,
    FockState,
    NumericState,
    PhotonState,
    SqueezedVacuumState,
    SubtractionRecord,
    ThermalState,
    correlation_g,
    make_state,
    mean_photon,
    pmf,
    pmf_to_csv,
    squeezed_gn,
    state_from_json,
    state_to_json,
    subtract_photons,
    subtracted_thermal_params,
)
from .quadrature import (
    MomentSummary,
    hermite_phi,
    kurtosis_band,
    moments_from_params,
    params_from_moments,
    quadrature_pdf,
    wigner,
)
from .reconstruct import (
    Chi2Result,
    FisherErrors,
    FitResult,
    MomentEstimate,
    chi2_gof,
    compound_fidelity,
    fidelity_diag,
    fisher_errors,
    fit_conditional_dataset,
    mle_fit,
    moment_estimate,
)
from .simulator import (
    ConditionalDataset,
    CorrelatedBinsWarning,
    CwEventLog,
    CwExperimentConfig,
    complex_ou_path,
    extract_conditional_bins,
    sample_photon_numbers,
    sample_quadratures_direct,
    simulate_cw,
)

__all__ = [
    "__version__",
    # errors
    "PhotonSubError",
    "DomainError",
    "ConfigError",
    "DataError",
    "EstimationError",
    "InsufficientDataError",
    "MomentIncompatibilityError",
    "FitConvergenceError",
    # genfunc
    "PhotonState",
    "FockState",
    "CoherentState",
    "SqueezedVacuumState",
    "ThermalState",
    "CompoundPoissonState",
    "NumericState",
    "CompoundPoissonParams",
    "SubtractionRecord",
    "make_state",
    "pmf",
    "subtract_photons",
    "mean_photon",
    "correlation_g",
    "squeezed_gn",
    "subtracted_thermal_params",
    "state_to_json",
    "state_from_json",
    "pmf_to_csv",
    # quadrature
    "MomentSummary",
    "hermite_phi",
    "quadrature_pdf",
    "moments_from_params",
    "params_from_moments",
    "kurtosis_band",
    "wigner",
    # simulator
    "CwExperimentConfig",
    "CwEventLog",
    "ConditionalDataset",
    "CorrelatedBinsWarning",
    "simulate_cw",
    "extract_conditional_bins",
    "sample_quadratures_direct",
    "sample_photon_numbers",
    "complex_ou_path",
    # reconstruct
    "FitResult",
    "Chi2Result",
    "FisherErrors",
    "MomentEstimate",
    "moment_estimate",
    "mle_fit",
    "fisher_errors",
    "chi2_gof",
    "fidelity_diag",
    "compound_fidelity",
    "fit_conditional_dataset",
]
