"""hopflab: numerics for periodically kicked degenerate Hopf bifurcations.

Layers, bottom to top:

  circle       circle-map families, critical structure, orbit bookkeeping
  misiurewicz  expansion/recovery/distortion checks, the certified
               two-parameter search, rank-one checklist items
  kicked       kick map, reduced/full flows, resonant-mu machinery,
               annulus return maps, convergence and perturbation reports
  diagnostics  Lyapunov exponents, occupation histograms, correlation and
               CLT statistics, basin sampling
  reporting    certificates, CSVs, binary histograms, run manifests
  config/cli   experiment configuration and the command-line front end
"""

from .circle import (
    HOPF_FAMILY,
    SINE,
    COSINE,
    CriticalStructure,
    DegenerateCriticalError,
    OneDFamily,
    OrbitTrace,
    TrigPolynomial,
    circle_distance,
    critical_points,
    derivative,
    distance_to_set,
    eval_family,
    eval_family_lift,
    iterate_orbit,
    wrap_angle,
)
from .kicked import (
    AnnulusPoint,
    HopfSystem,
    LeftAnnulusError,
    NonMonotoneError,
    NotRelaxableError,
    ReturnMap,
    StepFailureError,
    annulus_invariant,
    convergence_report,
    determinant_ratio_scan,
    first_resonant_index,
    full_flow,
    gronwall_bound,
    kick,
    kick_jacobian_det,
    mu_max,
    mu_n,
    mu_of_a,
    mu_sequence,
    perturbation_magnitude,
    reduced_flow,
    relaxation_time,
    return_map,
    singular_limit_restriction,
    solve_xi_equals,
    xi,
)
from .misiurewicz import (
    DegenerateJacobianError,
    ExpansionCheckResult,
    MisiurewiczCertificate,
    NoEscapeError,
    NotEventuallyPositiveError,
    OrbitCheckResult,
    PinEvidence,
    PreconditionViolatedError,
    RankOneReport,
    SearchConfig,
    SearchExhaustedError,
    SearchRegion,
    build_certificate,
    check_critical_orbits,
    check_outside_expansion,
    choose_expansion_constant,
    covering_matrix,
    critical_curve,
    delta2_of,
    find_misiurewicz_pair,
    gamma_jacobian,
    local_distortion_ratio,
    mixing_conditions,
    rank_one_report,
    recovery_estimate,
    refine_nested_rectangles,
    transversality_margin,
    turn_nondegeneracy,
    verify_region_hypotheses,
)
from .diagnostics import (
    DegenerateObservableError,
    EscapedError,
    Histogram2D,
    LyapunovEstimate,
    ZeroVarianceError,
    autocorrelation,
    basin_sample,
    clt_check,
    clt_from_series,
    empirical_measure,
    lyapunov_over_parameters,
    ks_normal_statistic,
    lyapunov_top,
    make_rng,
    observable_series,
    pushforward_tv,
    random_annulus_point,
    tv_distance,
)
from .config import RunConfig

__version__ = "0.1.0"
