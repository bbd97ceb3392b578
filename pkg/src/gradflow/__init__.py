"""Gradient flows of relative entropy on a periodic 1-D grid.

Simulates the birth-death (FR), transport (W), and combined (WFR) flows of
the KL divergence toward a Gibbs target, evaluates the closed-form solution
of the birth-death flow through the geometric interpolation path, and checks
the measured decay against cumulant-series predictions.
"""

__version__ = "0.1.0"

from .analysis import (
    AdditivityReport,
    ResidualReport,
    SlopeEstimate,
    residual_to_csv,
    slope,
    slope_additivity_report,
    slopes_table_text,
    slopes_to_csv,
    theory_residual,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    bundled_config_names,
    config_hash,
    load_config,
    parse_config,
    resolve_config_path,
)
from .cumulant import (
    CumulantTable,
    build_table,
    cgf_eval,
    cgf_prime,
    cumulants_to_csv,
    kl_closed_form,
    kl_series,
    kl_series_error,
    renyi_closed_form,
    renyi_series,
)
from .flow import (
    FLOW_KINDS,
    PDE_KINDS,
    CflViolation,
    FlowDiverged,
    FlowState,
    RunSpec,
    annealing_path,
    cfl_limit,
    fr_exact,
    fr_step,
    init_state,
    run,
    w_step,
    wfr_step,
)
from .grid import Grid, make_grid, periodic_gradient, periodic_laplacian, quadrature
from .measure import (
    AssumptionReport,
    LogDensity,
    check_assumptions,
    chi2,
    density_fingerprint,
    density_to_csv,
    from_potential,
    kl,
    log_normalizer,
    normalize,
    renyi,
    uniform,
)
from .potential import (
    BUILTIN_NAMES,
    Potential,
    TabulatedPotential,
    TrigTerm,
    blend,
    builtin,
    potential_from_config,
)
from .trace import FlowTrace, trace_from_csv, trace_to_csv

__all__ = [
    "__version__",
    # grid
    "Grid",
    "make_grid",
    "quadrature",
    "periodic_gradient",
    "periodic_laplacian",
    # potential
    "Potential",
    "TabulatedPotential",
    "TrigTerm",
    "BUILTIN_NAMES",
    "blend",
    "builtin",
    "potential_from_config",
    # measure
    "LogDensity",
    "AssumptionReport",
    "normalize",
    "from_potential",
    "uniform",
    "log_normalizer",
    "kl",
    "renyi",
    "chi2",
    "check_assumptions",
    "density_fingerprint",
    "density_to_csv",
    # cumulant
    "CumulantTable",
    "build_table",
    "cgf_eval",
    "cgf_prime",
    "kl_closed_form",
    "renyi_closed_form",
    "kl_series",
    "renyi_series",
    "kl_series_error",
    "cumulants_to_csv",
    # flow
    "FLOW_KINDS",
    "PDE_KINDS",
    "FlowState",
    "FlowDiverged",
    "CflViolation",
    "RunSpec",
    "init_state",
    "fr_step",
    "w_step",
    "wfr_step",
    "fr_exact",
    "annealing_path",
    "cfl_limit",
    "run",
    # trace
    "FlowTrace",
    "trace_to_csv",
    "trace_from_csv",
    # analysis
    "SlopeEstimate",
    "ResidualReport",
    "AdditivityReport",
    "slope",
    "theory_residual",
    "slope_additivity_report",
    "slopes_table_text",
    "slopes_to_csv",
    "residual_to_csv",
    # config
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "config_hash",
    "resolve_config_path",
    "bundled_config_names",
]
