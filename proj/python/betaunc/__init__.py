"""Beta-likelihood uncertainty estimation for single-lead signal classification."""

from ._betaunc import (
    DataError,
    Model,
    Prediction,
    Record,
    beta_log_pdf,
    beta_nll_grad,
    density_grid,
    digamma,
    evaluate,
    ln_beta,
    ln_gamma,
    load_dataset,
    mixture_summary,
    reject_by_uncertainty,
    run_cli,
    synth_generate,
    train,
)

__all__ = [
    "DataError",
    "Model",
    "Prediction",
    "Record",
    "beta_log_pdf",
    "beta_nll_grad",
    "density_grid",
    "digamma",
    "evaluate",
    "ln_beta",
    "ln_gamma",
    "load_dataset",
    "mixture_summary",
    "reject_by_uncertainty",
    "run_cli",
    "synth_generate",
    "train",
]
