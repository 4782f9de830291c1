"""Random-effect Bayesian Mendelian randomization with missing exposures."""

from ._core import (
    ConfigError,
    Dataset,
    McmcConfig,
    NumericalError,
    PriorSpec,
    SimConfig,
    fit,
    fit_partitioned,
    gkde2d,
    ivw,
    load_dataset,
    score_replicates,
    simulate,
    summarize,
    tag_word,
    task_seed,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "McmcConfig",
    "NumericalError",
    "PriorSpec",
    "SimConfig",
    "fit",
    "fit_partitioned",
    "gkde2d",
    "ivw",
    "load_dataset",
    "score_replicates",
    "simulate",
    "summarize",
    "tag_word",
    "task_seed",
]
