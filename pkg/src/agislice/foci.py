"""Closed-form metrics of the popular-file (FoCI) slice.

The number of valid cached files is a birth-death chain on 0..C_p: the HAP
refreshes one file at rate R_HP / L_p and the cache loses one at rate mu_p.
State i means the i most popular files are valid, so a request hits with
probability p_1 + ... + p_i.  Misses go to the RSU, an M/D/1 queue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnstableQueueError
from .mana import md1_rate_factor, md1_sojourn
from .model import FociConfig, Popularity

RHO_ONE_TOL = 1e-9


@dataclass(frozen=True)
class CacheChain:
    rho: float
    slots: int
    steady_state: tuple[float, ...]


@dataclass(frozen=True)
class FociAnalysis:
    hit_ratio: float
    rho: float
    thinned_arrival: float
    mean_delay: float
    cache_utilization: float


def zipf(files: int, skew: float) -> Popularity:
    """Zipf popularity p_f proportional to f^-skew over ranks 1..files."""
    if int(files) != files or files < 1:
        raise ValueError(f"file count must be a positive integer, got {files!r}")
    if not (math.isfinite(skew) and skew >= 0):
        raise ValueError(f"skewness must be non-negative, got {skew!r}")
    weights = np.arange(1, int(files) + 1, dtype=float) ** -float(skew)
    total = math.fsum(weights)
    return Popularity(tuple(weights / total), zipf_skew=float(skew))


def inverse_update_rate(cfg: FociConfig) -> float:
    """rho = mu_p L_p / R_HP; infinite when the HAP pushes nothing."""
    if cfg.hap_rate == 0:
        return math.inf
    return cfg.expire_rate * cfg.file_size / cfg.hap_rate


def _check_rho(rho: float) -> None:
    if math.isnan(rho) or rho <= 0:
        raise ValueError(f"rho must be positive, got {rho!r}")


def _ratio(a: np.ndarray, big: int, rho: float) -> np.ndarray:
    """(1 - rho^a) / (1 - rho^big) without overflow or cancellation, rho != 1."""
    if rho < 1:
        lr = math.log(rho)
        return np.expm1(a * lr) / math.expm1(big * lr)
    ls = math.log(rho)  # > 0; rewrite with sigma = 1/rho = e^-ls < 1
    return np.exp(-(big - a) * ls) * np.expm1(-a * ls) / math.expm1(-big * ls)


def cache_steady_state(rho: float, slots: int) -> tuple[float, ...]:
    """Stationary distribution r_0..r_C of the valid-file count."""
    _check_rho(rho)
    if slots < 0:
        raise ValueError("slots must be non-negative")
    if math.isinf(rho):
        return (1.0,) + (0.0,) * slots
    if abs(rho - 1.0) < RHO_ONE_TOL:
        return (1.0 / (slots + 1),) * (slots + 1)
    i = np.arange(slots + 1, dtype=float)
    if rho < 1:
        lr = math.log(rho)
        r = np.exp((slots - i) * lr) * (math.expm1(lr) / math.expm1((slots + 1) * lr))
    else:
        ls = math.log(rho)
        r = np.exp(-i * ls) * (math.expm1(-ls) / math.expm1(-(slots + 1) * ls))
    return tuple(float(v) for v in r)


def cache_chain(cfg: FociConfig) -> CacheChain:
    rho = inverse_update_rate(cfg)
    return CacheChain(rho, cfg.cache_slots, cache_steady_state(rho, cfg.cache_slots))


def _check_slots(pop: Popularity, slots: int) -> None:
    if slots < 0:
        raise ValueError("slots must be non-negative")
    if slots > pop.files:
        raise ValueError(f"cannot cache {slots} distinct files out of {pop.files}")


def hit_ratio(pop: Popularity, rho: float, slots: int) -> float:
    """On-board hit ratio, closed form summed over file rank."""
    _check_rho(rho)
    _check_slots(pop, slots)
    if slots == 0 or math.isinf(rho):
        return 0.0
    p = np.asarray(pop.probabilities[:slots])
    f = np.arange(1, slots + 1, dtype=float)
    if abs(rho - 1.0) < RHO_ONE_TOL:
        w = (slots - f + 1) / (slots + 1)
    else:
        w = _ratio(slots - f + 1, slots + 1, rho)
    return math.fsum(p * w)


def hit_ratio_direct(pop: Popularity, rho: float, slots: int) -> float:
    """Same quantity as :func:`hit_ratio`, summed over chain states instead."""
    _check_slots(pop, slots)
    r = cache_steady_state(rho, slots)
    prefix = np.concatenate([[0.0], np.cumsum(pop.probabilities[:slots])])
    return math.fsum(ri * prefix[i] for i, ri in enumerate(r))


def cache_utilization(rho: float, slots: int) -> float:
    """Mean fraction of cache slots holding a valid file."""
    if slots == 0:
        return 0.0
    r = cache_steady_state(rho, slots)
    return math.fsum(i * ri for i, ri in enumerate(r)) / slots


def thinned_arrival(p_hit: float, request_rate: float) -> float:
    return request_rate * (1.0 - p_hit)


def foci_delay(arrival_rate: float, file_size: float, rsu_rate: float) -> float:
    """Mean M/D/1 sojourn of RSU-served (missed) requests."""
    if rsu_rate <= 0:
        raise UnstableQueueError(math.inf, "FoCI RSU queue")
    return md1_sojourn(arrival_rate, file_size / rsu_rate, "FoCI RSU queue")


def min_rsu_rate_foci(p_hit: float, request_rate: float, delay_target: float, file_size: float) -> float:
    """Smallest RSU rate keeping the FoCI mean delay at ``delay_target``."""
    if delay_target <= 0:
        raise ValueError("delay_target must be positive")
    z = thinned_arrival(p_hit, request_rate) * delay_target
    return md1_rate_factor(z) * file_size / delay_target


def saturate_rate(cfg: FociConfig, fraction: float = 0.95, rel_tol: float = 1e-9) -> float:
    """HAP rate at which the hit ratio reaches ``fraction`` of its full-cache ceiling.

    The ceiling is the hit ratio with every slot valid (rho -> 0).  Above this
    rate extra HAP bandwidth buys little; more cache is needed instead.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    if cfg.cache_slots == 0:
        return 0.0
    pop, c = cfg.popularity, cfg.cache_slots
    target = fraction * math.fsum(pop.probabilities[:c])
    scale = cfg.expire_rate * cfg.file_size  # rate at rho = 1

    def hit_at(rate):
        return hit_ratio(pop, scale / rate, c)

    lo, hi = 0.0, scale
    while hit_at(hi) < target:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid > 0 and hit_at(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def analyze_foci(cfg: FociConfig) -> FociAnalysis:
    rho = inverse_update_rate(cfg)
    p_hit = hit_ratio(cfg.popularity, rho, cfg.cache_slots)
    lam = thinned_arrival(p_hit, cfg.request_rate)
    try:
        delay = foci_delay(lam, cfg.file_size, cfg.rsu_rate)
    except UnstableQueueError:
        delay = math.inf
    return FociAnalysis(
        hit_ratio=p_hit, rho=rho, thinned_arrival=lam, mean_delay=delay,
        cache_utilization=cache_utilization(rho, cfg.cache_slots),
    )
