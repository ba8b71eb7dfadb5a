"""Tail certification for Markov jump processes.

Simulates first returns to a reference set, estimates the polynomial decay
of the return-time tail, and checks the pieces the argument rests on:
exactly solvable oracle chains, finite-chain coupling bounds, and
stationarity diagnostics for the sampled initial laws.
"""

from .engine import (
    EvolveResult,
    Model,
    PassageOutcome,
    RefSet,
    evolve_series,
    evolve_until,
    false_return_stats,
    first_passage,
    next_event,
    sample_chain,
)
from .farm import (
    EnsembleInitial,
    FixedInitial,
    LawInitial,
    resolve_workers,
    run_passage_counts,
    run_tail,
)
from .models import (
    CountdownOracle,
    CountdownParams,
    IntSet,
    RhmBox,
    RhmModel,
    RhmParams,
    RhmState,
    SeeBox,
    SeeModel,
    SeeParams,
    model_from_dict,
)
from .rng import (
    PHASE_BURN,
    PHASE_CORRELATION,
    PHASE_COUPLING,
    PHASE_GENERIC,
    PHASE_PASSAGE,
    PHASE_RENEWAL,
    PHASE_SERIES,
    RngStream,
    pack_key,
    stream,
)
from .tails import (
    GammaEstimate,
    SurvivalCurve,
    TailCounts,
    TailFit,
    agresti_coull,
    estimate_survival,
    fit_slope,
    fit_window,
    gamma_estimate,
    log_grid,
    moment_tail_check,
    power_law_tail,
    reliable_range,
)
from .scan import (
    ConfirmReport,
    Lattice,
    ScanReport,
    TailConfig,
    confirm_from_data,
    confirm_maximizer,
    grid_scan,
    monotone_verdict,
    rhm_lattice,
    see_lattice,
    sweep_1d,
)
from .couplab import (
    DiscreteChain,
    RenewalSpec,
    SplitChainSpec,
    chain_from_json,
    chain_to_json,
    coupling_inequality_check,
    dominate_check,
    exact_tv_curve,
    minorization,
    sample_renewal_couplings,
    split_chain,
)
from .stationary import (
    Ensemble,
    ObservableSeries,
    ObservableSpec,
    burn_in,
    correlation_decay,
    ensemble_covariance,
    read_ensemble,
    stabilization_series,
    write_ensemble,
)
from .config import ConfigError, ExperimentConfig, validate_config
from .cli import main, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConfirmReport",
    "CountdownOracle",
    "CountdownParams",
    "DiscreteChain",
    "Ensemble",
    "EnsembleInitial",
    "EvolveResult",
    "ExperimentConfig",
    "FixedInitial",
    "GammaEstimate",
    "IntSet",
    "Lattice",
    "LawInitial",
    "Model",
    "ObservableSeries",
    "ObservableSpec",
    "PHASE_BURN",
    "PHASE_CORRELATION",
    "PHASE_COUPLING",
    "PHASE_GENERIC",
    "PHASE_PASSAGE",
    "PHASE_RENEWAL",
    "PHASE_SERIES",
    "PassageOutcome",
    "RefSet",
    "RenewalSpec",
    "RhmBox",
    "RhmModel",
    "RhmParams",
    "RhmState",
    "RngStream",
    "ScanReport",
    "SeeBox",
    "SeeModel",
    "SeeParams",
    "SplitChainSpec",
    "SurvivalCurve",
    "TailConfig",
    "TailCounts",
    "TailFit",
    "agresti_coull",
    "burn_in",
    "chain_from_json",
    "chain_to_json",
    "confirm_from_data",
    "confirm_maximizer",
    "correlation_decay",
    "coupling_inequality_check",
    "dominate_check",
    "ensemble_covariance",
    "estimate_survival",
    "evolve_series",
    "evolve_until",
    "exact_tv_curve",
    "false_return_stats",
    "first_passage",
    "fit_slope",
    "fit_window",
    "gamma_estimate",
    "grid_scan",
    "log_grid",
    "main",
    "minorization",
    "model_from_dict",
    "moment_tail_check",
    "monotone_verdict",
    "next_event",
    "pack_key",
    "power_law_tail",
    "read_ensemble",
    "reliable_range",
    "resolve_workers",
    "rhm_lattice",
    "run_experiment",
    "run_passage_counts",
    "run_tail",
    "sample_chain",
    "sample_renewal_couplings",
    "see_lattice",
    "split_chain",
    "stabilization_series",
    "stream",
    "sweep_1d",
    "validate_config",
    "write_ensemble",
]
