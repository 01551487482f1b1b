"""Monotone drift estimation for recurrent diffusions from repeated paths."""

from .kernels import GAUSSIAN, TRIWEIGHT, KernelSpec, cdf, pdf, pdf_scaled
from .nadaraya import (
    CurveOnGrid,
    EstimatorConfig,
    LoocvSelection,
    af_estimate,
    density_estimate,
    nw_drift,
    read_curve_csv,
    select_eta_loocv,
    write_curve_csv,
)
from .monotone import (
    EVAL_GRID_POINTS,
    AdaptiveSelection,
    BandwidthPair,
    MonotoneInput,
    check_theory_range,
    eval_grid,
    inverse_estimate,
    monotone_estimate,
    practical_estimate,
    select_lh_adaptive,
    smooth_inverse_oracle,
    smooth_monotone_oracle,
    tabulate_monotone,
)
from .sde import (
    HittingTimeBudgetError,
    PathBundle,
    SdeModel,
    SimulationDivergedError,
    builtin_model,
    extract_copies_from_long_path,
    find_copy_starts,
    read_paths_csv,
    simulate_copies,
    write_paths_csv,
)
from .experiment import (
    CURVE_GRID_POINTS,
    ExperimentReport,
    ExperimentSpec,
    RepetitionRow,
    default_bandwidth_grid,
    emit_figure_data,
    integrated_l1_error,
    make_pair_grid,
    run_experiment,
    run_repetition,
    write_report_json,
    write_table_csv,
)
from .config import ConfigError, RunConfig, build_config, dump_config, experiment_spec

__version__ = "0.1.0"
