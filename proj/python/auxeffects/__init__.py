"""Effects in groups defined by a post-treatment auxiliary outcome.

Python surface over the C++ core: synthetic worlds, the population oracle,
the estimator families (conventional regression, expected-auxiliary
stratification, structural nested mean models, principal stratification by
EM, and artificial-censoring survival G-estimation), and the Monte Carlo
study harness.
"""

from ._core import (
    CompleteDataset,
    NumericalFailure,
    ObservedDataset,
    SurvivalDataset,
    ValidationError,
    World,
    child_seed,
    conventional,
    eas,
    load_complete_csv,
    load_observed_csv,
    load_survival_csv,
    load_world,
    mask,
    mediation_solve,
    naive_contrast,
    parse_world,
    ps_fit,
    run_study,
    run_study_file,
    simulate_complete,
    simulate_survival,
    snm_solve,
    survival_profile,
    truth_report,
    write_complete_csv,
    write_observed_csv,
    write_survival_csv,
)

__version__ = "0.1.0"

__all__ = [
    "CompleteDataset",
    "NumericalFailure",
    "ObservedDataset",
    "SurvivalDataset",
    "ValidationError",
    "World",
    "child_seed",
    "conventional",
    "eas",
    "load_complete_csv",
    "load_observed_csv",
    "load_survival_csv",
    "load_world",
    "mask",
    "mediation_solve",
    "naive_contrast",
    "parse_world",
    "ps_fit",
    "run_study",
    "run_study_file",
    "simulate_complete",
    "simulate_survival",
    "snm_solve",
    "survival_profile",
    "truth_report",
    "write_complete_csv",
    "write_observed_csv",
    "write_survival_csv",
    "__version__",
]
