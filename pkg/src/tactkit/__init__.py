"""Black-box configuration tuning with Taguchi designs, SNR scoring and search."""

from tactkit.errors import DescriptionError, DesignError, StatsError, StoreError, TactError
from tactkit.experiment import (
    AggregationSpec,
    Combination,
    Enumeration,
    ExperimentDescription,
    Factor,
    Range,
    enumerate_levels,
    level_in_domain,
    parse_experiment_description,
    serialize_experiment_description,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationSpec",
    "Combination",
    "DescriptionError",
    "DesignError",
    "Enumeration",
    "ExperimentDescription",
    "Factor",
    "Range",
    "StatsError",
    "StoreError",
    "TactError",
    "enumerate_levels",
    "level_in_domain",
    "parse_experiment_description",
    "serialize_experiment_description",
]
