"""Differentially private low-rank covariance approximation with a complex
Gaussian mechanism, eigenvalue-diffusion simulation, and GUE/GOE gap
statistics."""

__version__ = "0.1.0"

from .errors import (
    DegenerateGap,
    DplrError,
    InsufficientTailData,
    InvalidInput,
    InvalidPrivacyBudget,
    InvalidRank,
    InvalidSpectrum,
    NoGaps,
    RowNormViolation,
    StiffnessFailure,
)
from .hermitian import (
    EigenDecomposition,
    HermitianMatrix,
    SpectrumSlice,
    eigh,
    frobenius_distance,
    frobenius_norm,
    rank_k_truncate,
    read_matrix,
    sin_theta_bound,
    spectral_norm,
    spectrum_slice,
    top_k_projector,
    weyl_interval,
    write_matrix,
)
from .randmat import NoiseEnsemble, RngStream, brownian_increment, sample_noise
from .mechanism import (
    DataMatrix,
    MechanismResult,
    PrivacyParams,
    UtilityMetrics,
    check_gap_assumption,
    complex_gaussian_mechanism,
    covariance_from_rows,
    neighbor_perturb,
    privacy_time,
    real_gaussian_mechanism,
    subspace_mechanism,
)
from .dyson import (
    CoupledGapReport,
    TailSample,
    TimeGrid,
    TrajectorySet,
    collect_gap_samples,
    coupled_gap_run,
    eigenvalue_sde_path,
    eigenvector_flow_path,
    fit_tail_exponent,
    matrix_diffusion_path,
)
from .bounds import (
    ClassicalSpectrum,
    PolylogFactor,
    classical_locations,
    covariance_utility_bound,
    gap_bound_rhs,
    gap_threshold,
    rigidity_envelope,
    semicircle_density,
    spectral_sup_tail,
    spectral_sup_threshold,
    subspace_utility_bound,
    weaker_metric_bound,
)
from .spectra import SpectrumFamily, generate_spectrum
from .estimators import PrivateLowRankCovariance, PrivateSubspaceProjector

__all__ = [name for name in dir() if not name.startswith("_")]
