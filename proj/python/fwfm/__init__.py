"""Field-weighted factorization machines for sparse categorical data."""

from ._core import (
    ConfigError,
    ContractError,
    Dataset,
    DivergedError,
    Error,
    FrequencyFilter,
    Model,
    ParseError,
    PlantedSpec,
    UndefinedMetricError,
    auc,
    downsample_negatives,
    learned_strength,
    load_libffm,
    load_libffm_like,
    logloss,
    make_planted,
    mutual_information,
    pearson_upper,
    run_cli,
    split,
    strength_without_r,
    train,
)

MODELS = ("lr", "poly2", "fm", "ffm", "fwfm-lw", "fwfm-felv", "fwfm-filv")

__all__ = [name for name in dir() if not name.startswith("_")]
