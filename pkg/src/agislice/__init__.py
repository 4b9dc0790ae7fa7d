"""Closed-form analysis, simulation and slicing of HAP/RSU vehicular resources."""

from .errors import ConfigError, UnstableQueueError
from .foci import (analyze_foci, cache_steady_state, foci_delay, hit_ratio, min_rsu_rate_foci,
                   saturate_rate, zipf)
from .mana import (accomplishment_bounds, accomplishment_ratio, analyze_mana, block_accomplishment,
                   md1_delay_bound, mean_service_time, mg1_delay, min_rsu_rate_mana,
                   saddle_hap_rate)
from .model import (FociConfig, GridSpec, ManaConfig, MobilityProfile, Popularity, ResourceBudget,
                    RunConfig, RunSettings, SlicingSolution, load_config, parse_config, validate)
from .numerics import erlang_cdf, erlang_pdf, erlang_sample, reg_gamma
from .optimizer import SchemeResult, SliceDemand, comparison_schemes, min_total_rsu, solve_p1
from .simulator import SimControl, rng_stream, simulate_foci, simulate_mana

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "FociConfig", "GridSpec", "ManaConfig", "MobilityProfile", "Popularity",
    "ResourceBudget", "RunConfig", "RunSettings", "SchemeResult", "SimControl", "SliceDemand",
    "SlicingSolution", "UnstableQueueError", "accomplishment_bounds", "accomplishment_ratio",
    "analyze_foci", "analyze_mana", "block_accomplishment", "cache_steady_state",
    "comparison_schemes", "erlang_cdf", "erlang_pdf", "erlang_sample", "foci_delay", "hit_ratio",
    "load_config", "md1_delay_bound", "mean_service_time", "mg1_delay", "min_rsu_rate_foci",
    "min_rsu_rate_mana", "min_total_rsu", "parse_config", "reg_gamma", "rng_stream",
    "saddle_hap_rate", "saturate_rate", "simulate_foci", "simulate_mana", "solve_p1", "validate",
    "zipf",
]
