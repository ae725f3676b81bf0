"""Monte Carlo studies of large-sample behavior at desk scale."""

from .dgp import TRUTHS, DgpSpec, simulate
from .harness import McReport, binomial_se, run_reps
from .studies import (
    STUDIES,
    bootstrap_agreement_study,
    coverage_study,
    linearization_study,
    matrix_study,
    misspecification_study,
    normality_study,
    omega_truth,
    rate_study,
    run_study,
    study_setup,
    unit_weight_bootstrap_value,
)

__all__ = [
    "TRUTHS",
    "DgpSpec",
    "simulate",
    "McReport",
    "binomial_se",
    "run_reps",
    "STUDIES",
    "bootstrap_agreement_study",
    "coverage_study",
    "linearization_study",
    "matrix_study",
    "misspecification_study",
    "normality_study",
    "omega_truth",
    "rate_study",
    "run_study",
    "study_setup",
    "unit_weight_bootstrap_value",
]
