"""Distributed consensus+innovations nonlinear least squares toolkit."""

__version__ = "0.1.0"

from .graph import (
    NetworkGraph,
    InvalidGraphError,
    GraphGenerationError,
    build_graph,
    fiedler_value,
    generate_random_geometric,
    graph_from_json,
    graph_to_json,
    neighbors,
)
from .sensing import (
    FeasibleSet,
    SensingModel,
    box,
    whole_space,
    pairwise_sine_model,
    linear_model,
    sample_observation,
    finite_difference_gradient,
    project,
    model_from_json,
    model_to_json,
    feasible_set_from_json,
    feasible_set_to_json,
)
from .estimator import (
    EstimatorState,
    GainSchedule,
    NumericalDivergenceError,
    alpha,
    beta,
    consensus_stability_bound,
    consensus_term,
    innovation_term,
    initial_state,
    run,
    step,
    trajectory_to_csv,
    trajectory_summary_csv,
)
from .centralized import (
    CovarianceReport,
    GainRecovery,
    HistoryStats,
    InfeasibleGainError,
    SingularInformationError,
    WnlsResult,
    covariance_gap_bound,
    covariance_report,
    covariance_report_to_json,
    distributed_eigenvalues,
    gamma_matrix,
    linear_wnls_closed_form,
    projected_stationarity_gap,
    recover_innovation_gain,
    sigma_centralized,
    sigma_distributed,
    wnls_cost,
    wnls_estimate,
)
from .audit import (
    AuditReport,
    GainFeasibility,
    audit_report_to_json,
    check_gain_feasible,
    check_global_observability,
    default_innovation_gain,
    delta1_upper_bound,
    estimate_lipschitz,
    estimate_monotonicity_constant,
    k_star_max,
    run_audit,
    scan_gamma_min_eigenvalue,
)
from .harness import (
    EnsembleError,
    ExperimentConfig,
    MetricsRecord,
    TrialTrace,
    aggregate,
    benchmark_gain_constant,
    checkpoint_epochs,
    export_csv,
    read_metrics_csv,
    reproduce_paper_experiment,
    run_monte_carlo,
    run_trial,
    splitmix64,
    trial_seed,
)
