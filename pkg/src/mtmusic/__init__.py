"""Robust DOA estimation with measure-transformed MUSIC.

Snapshot simulation under compound-Gaussian noise, the Gaussian
measure-transformed covariance with data-driven scale selection, robust
baseline estimators, MUSIC peak finding, MDL model-order selection,
forward/backward spatial smoothing for coherent sources, influence-function
diagnostics, and a deterministic Monte Carlo benchmark harness.
"""

from .bench import (
    BenchConfig,
    BenchReport,
    BenchRow,
    ScenarioSpec,
    parse_config,
    preset,
    read_report_csv,
    run_bench,
    write_report_csv,
)
from .doa import (
    DoaSet,
    PseudoSpectrum,
    SmoothingConfig,
    doa_rmse,
    noise_subspace,
    pick_peaks,
    pseudo_spectrum,
    spatial_smooth_fb,
)
from .estimators import (
    ESTIMATOR_IDS,
    CovarianceEstimate,
    MtFunctionSpec,
    TauSelection,
    empirical_mt_covariance,
    estimate_covariance,
    mad_variance,
    mt_weights,
    sample_covariance,
    select_tau,
    sigma_from_mt,
    sign_covariance,
    tyler_m_estimator,
    zmnl_covariance,
)
from .influence import (
    IfCurve,
    MtMoments,
    empirical_influence,
    fisher_ratio_bounds,
    gaussian_analytic_mt_moments,
    influence_curve,
    influence_mt,
)
from .linalg import EigenDecomposition, frob_norm, hermitian_eig, solve_hpd
from .order import MdlResult, estimate_order, mdl_criterion
from .simulate import (
    NoiseConfig,
    SnapshotBatch,
    SourceConfig,
    UlaGeometry,
    derive_rng,
    sample_noise,
    sample_sources,
    steering_matrix,
    synthesize_snapshots,
)

__version__ = "0.1.0"
