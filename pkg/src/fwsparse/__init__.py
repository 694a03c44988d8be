"""Frank-Wolfe, MP and OMP for exact-sparse recovery, with dictionary
conditioning metrics and checks of the recovery/convergence bounds."""

__version__ = "0.1.0"

from .dictionary import (
    Dictionary,
    DictionaryMetrics,
    analyze,
    babel,
    coherence,
    erc,
    lambda_min_lower_bound,
    load_dictionary,
    m_star,
    new_dictionary,
    save_dictionary,
)
from .estimators import (
    DictionaryAnalyzer,
    FrankWolfeRegressor,
    MatchingPursuitRegressor,
    OMPRegressor,
)
from .pursuit import (
    FwConfig,
    IterationRecord,
    PursuitConfig,
    SolverTrace,
    fw_solve,
    fw_step_size,
    mp_solve,
    omp_solve,
    rho,
    select_atom,
)
from .synth import SparseInstance, SynthConfig, gen_dictionary, gen_instance
from .theory import (
    TheoryReport,
    beta_threshold,
    first_iter_rate,
    iterate_l1_bound,
    theta,
    validate_trace,
)

__all__ = [
    "Dictionary", "DictionaryMetrics", "analyze", "babel", "coherence", "erc",
    "lambda_min_lower_bound", "load_dictionary", "m_star", "new_dictionary", "save_dictionary",
    "DictionaryAnalyzer", "FrankWolfeRegressor", "MatchingPursuitRegressor", "OMPRegressor",
    "FwConfig", "IterationRecord", "PursuitConfig", "SolverTrace", "fw_solve", "fw_step_size",
    "mp_solve", "omp_solve", "rho", "select_atom",
    "SparseInstance", "SynthConfig", "gen_dictionary", "gen_instance",
    "TheoryReport", "beta_threshold", "first_iter_rate", "iterate_l1_bound", "theta",
    "validate_trace",
]
