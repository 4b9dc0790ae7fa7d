"""Closed-form metrics of the map (MaNa) slice.

A vehicle prefetches the map of block J from the HAP while it crosses the
``min(J - 1, C_m)`` blocks before it.  With Erlang(K, mu_v) dwell per block the
window is Erlang(K * J', mu_v); the map is complete on arrival when the window
exceeds ``L_m / R_HM``.  Whatever is missing is fetched from the RSU, which is
analysed as an M/G/1 queue (exact mean) and as an M/D/1 queue (conservative
bound that admits a closed-form rate inversion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UnstableQueueError
from .model import ManaConfig, MobilityProfile
from .numerics import gamma_density, reg_lower_gamma, reg_upper_gamma


@dataclass(frozen=True)
class ManaAnalysis:
    p_acc: float
    p_acc_lower: float
    p_acc_upper: float
    mean_service: float
    service_second_moment: float
    mg1_delay: float
    md1_delay: float
    x: float
    thinned_arrival: float

    @property
    def service_variance(self) -> float:
        return self.service_second_moment - self.mean_service**2


def normalized_demand(cfg: ManaConfig, mob: MobilityProfile) -> float:
    """x = mu_v L_m / R_HM: the map size in units of mean dwell phases."""
    if cfg.hap_rate == 0:
        return math.inf
    return mob.erlang_rate * cfg.map_size / cfg.hap_rate


def window_shape(j: int, cfg: ManaConfig, mob: MobilityProfile) -> int:
    """Erlang shape of the HAP window for block J (0 means no window)."""
    if j < 1:
        raise ValueError(f"block index must be >= 1, got {j}")
    return mob.erlang_shape * min(j - 1, cfg.cache_slots)


def _tail(shape: int, x: float) -> float:
    # P{window >= x} for a unit-rate Erlang(shape) window
    if shape == 0 or math.isinf(x):
        return 0.0
    return reg_upper_gamma(shape, x)


def block_accomplishment(j: int, cfg: ManaConfig, mob: MobilityProfile) -> float:
    """Probability the map of the J-th block on a route is complete on entry."""
    return _tail(window_shape(j, cfg, mob), normalized_demand(cfg, mob))


def _block_shapes(cfg: ManaConfig, mob: MobilityProfile):
    """(weight, shape) pairs: blocks 1..C_m one by one, then all J > C_m pooled."""
    c = cfg.cache_slots
    head = [(g, window_shape(j, cfg, mob)) for j, g in enumerate(mob.route_dist[:c], start=1)]
    return head + [(math.fsum(mob.route_dist[c:]), mob.erlang_shape * c)]


def accomplishment_ratio(cfg: ManaConfig, mob: MobilityProfile) -> float:
    x = normalized_demand(cfg, mob)
    return min(1.0, math.fsum(g * _tail(s, x) for g, s in _block_shapes(cfg, mob)))


def beyond_cache_mass(cfg: ManaConfig, mob: MobilityProfile) -> float:
    """Route mass on blocks J > C_m, i.e. those whose window spans the full cache."""
    return math.fsum(mob.route_dist[cfg.cache_slots:])


def accomplishment_bounds(cfg: ManaConfig, mob: MobilityProfile) -> tuple[float, float]:
    """(lower, upper) bounds: the full-window tail, with and without route weighting."""
    upper = _tail(mob.erlang_shape * cfg.cache_slots, normalized_demand(cfg, mob))
    return beyond_cache_mass(cfg, mob) * upper, upper


def saddle_hap_rate(cfg: ManaConfig, mob: MobilityProfile) -> float:
    """HAP rate where the upper-bound accomplishment ratio turns from convex to concave."""
    if cfg.cache_slots < 1:
        raise ValueError("saddle rate undefined without map cache (cache_slots = 0)")
    return cfg.map_size * mob.erlang_rate / (mob.erlang_shape * cfg.cache_slots + 2)


def upper_bound_inflection_rate(cfg: ManaConfig, mob: MobilityProfile) -> float:
    """Exact inflection of Q(K C_m, mu_v L_m / R) in R.

    d/dR Q = x^(s+1) e^-x / (L_m mu_v Gamma(s)) with s = K C_m, whose own
    derivative vanishes at x = s + 1.  :func:`saddle_hap_rate` uses s + 2.
    """
    if cfg.cache_slots < 1:
        raise ValueError("inflection undefined without map cache (cache_slots = 0)")
    return cfg.map_size * mob.erlang_rate / (mob.erlang_shape * cfg.cache_slots + 1)


def _remaining_moments(shape: int, x: float, size: float) -> tuple[float, float]:
    """E[L^-], E[(L^-)^2] for an Erlang(shape) window and normalized demand x."""
    if shape == 0 or math.isinf(x):
        return size, size * size
    s = float(shape)
    p0 = reg_lower_gamma(s, x)
    first = size * ((1.0 - s / x) * p0 + gamma_density(s, x))
    p1 = reg_lower_gamma(s + 1.0, x)
    p2 = reg_lower_gamma(s + 2.0, x)
    second = size * size * (p0 - 2.0 * s * p1 / x + s * (s + 1.0) * p2 / (x * x))
    first = min(max(first, 0.0), size)
    second = min(max(second, 0.0), size * size)
    return first, max(second, first * first)


def expected_remaining(j: int, cfg: ManaConfig, mob: MobilityProfile) -> float:
    """Mean map bits still missing when a vehicle enters its J-th block."""
    return _remaining_moments(window_shape(j, cfg, mob), normalized_demand(cfg, mob), cfg.map_size)[0]


def remaining_second_moment(j: int, cfg: ManaConfig, mob: MobilityProfile) -> float:
    return _remaining_moments(window_shape(j, cfg, mob), normalized_demand(cfg, mob), cfg.map_size)[1]


def remaining_moments(cfg: ManaConfig, mob: MobilityProfile) -> tuple[float, float]:
    """Route-averaged E[L^-] and E[(L^-)^2], in bits and bits^2."""
    x = normalized_demand(cfg, mob)
    m1, m2 = [], []
    for g, s in _block_shapes(cfg, mob):
        a, b = _remaining_moments(s, x, cfg.map_size)
        m1.append(g * a)
        m2.append(g * b)
    return math.fsum(m1), math.fsum(m2)


def _rsu_rate(cfg: ManaConfig) -> float:
    if cfg.rsu_rate <= 0:
        raise ValueError("RSU rate required (mana.rsu_rate must be > 0)")
    return cfg.rsu_rate


def mean_service_time(cfg: ManaConfig, mob: MobilityProfile) -> float:
    return remaining_moments(cfg, mob)[0] / _rsu_rate(cfg)


def service_second_moment(cfg: ManaConfig, mob: MobilityProfile) -> float:
    return remaining_moments(cfg, mob)[1] / _rsu_rate(cfg) ** 2


def service_variance(cfg: ManaConfig, mob: MobilityProfile) -> float:
    m1, m2 = remaining_moments(cfg, mob)
    r = _rsu_rate(cfg)
    return max(0.0, m2 - m1 * m1) / (r * r)


def pollaczek_khinchine(arrival_rate: float, mean_service: float, second_moment: float,
                        what: str = "M/G/1 queue") -> float:
    """Mean sojourn time (wait + service) of an M/G/1 FIFO queue."""
    rho = arrival_rate * mean_service
    if rho >= 1:
        raise UnstableQueueError(rho, what)
    return mean_service + arrival_rate * second_moment / (2.0 * (1.0 - rho))


def md1_sojourn(arrival_rate: float, service_time: float, what: str = "M/D/1 queue") -> float:
    return pollaczek_khinchine(arrival_rate, service_time, service_time**2, what)


def mg1_delay(cfg: ManaConfig, mob: MobilityProfile) -> float:
    """Mean RSU delay with every vehicle queued, complete-map vehicles at zero service."""
    m1, m2 = remaining_moments(cfg, mob)
    r = _rsu_rate(cfg)
    return pollaczek_khinchine(mob.vehicle_arrival_rate, m1 / r, m2 / r**2, "MaNa RSU queue")


def thinned_arrival(p_acc: float, arrival_rate: float) -> float:
    return arrival_rate * (1.0 - p_acc)


def md1_delay_bound(cfg: ManaConfig, mob: MobilityProfile, p_acc: float | None = None) -> float:
    """Delay if every vehicle lacking a complete map fetched the whole map from the RSU."""
    if p_acc is None:
        p_acc = accomplishment_ratio(cfg, mob)
    lam = thinned_arrival(p_acc, mob.vehicle_arrival_rate)
    return md1_sojourn(lam, cfg.map_size / _rsu_rate(cfg), "MaNa RSU queue (M/D/1 bound)")


def md1_rate_factor(load: float) -> float:
    """R * T / L solving the M/D/1 sojourn = T, as a function of z = lambda' T.

    z / (1 + z - sqrt(1 + z^2)) rationalized to (1 + z + sqrt(1 + z^2)) / 2, which
    keeps full precision as z -> 0 and picks the stable root (lambda' L / R < 1).
    """
    if load < 0 or math.isnan(load):
        raise ValueError(f"normalized load must be non-negative, got {load!r}")
    return 0.5 * (1.0 + load + math.hypot(1.0, load))


def min_rsu_rate_mana(p_acc: float, arrival_rate: float, delay_target: float, map_size: float) -> float:
    """Smallest RSU rate meeting the M/D/1 delay bound ``delay_target``."""
    if delay_target <= 0:
        raise ValueError("delay_target must be positive")
    z = thinned_arrival(p_acc, arrival_rate) * delay_target
    return md1_rate_factor(z) * map_size / delay_target


def analyze_mana(cfg: ManaConfig, mob: MobilityProfile) -> ManaAnalysis:
    """All MaNa metrics at once; unstable queues report an infinite delay."""
    p_acc = accomplishment_ratio(cfg, mob)
    lower, upper = accomplishment_bounds(cfg, mob)
    m1, m2 = remaining_moments(cfg, mob)
    r = _rsu_rate(cfg)
    try:
        w_mg1 = pollaczek_khinchine(mob.vehicle_arrival_rate, m1 / r, m2 / r**2)
    except UnstableQueueError:
        w_mg1 = math.inf
    try:
        w_md1 = md1_delay_bound(cfg, mob, p_acc)
    except UnstableQueueError:
        w_md1 = math.inf
    return ManaAnalysis(
        p_acc=p_acc, p_acc_lower=lower, p_acc_upper=upper,
        mean_service=m1 / r, service_second_moment=m2 / r**2,
        mg1_delay=w_mg1, md1_delay=w_md1, x=normalized_demand(cfg, mob),
        thinned_arrival=thinned_arrival(p_acc, mob.vehicle_arrival_rate),
    )


__all__ = [
    "ManaAnalysis", "accomplishment_bounds", "accomplishment_ratio", "analyze_mana",
    "block_accomplishment", "expected_remaining", "md1_delay_bound", "md1_rate_factor",
    "md1_sojourn", "mean_service_time", "mg1_delay", "min_rsu_rate_mana", "normalized_demand",
    "pollaczek_khinchine", "remaining_moments", "remaining_second_moment",
    "saddle_hap_rate", "service_second_moment", "service_variance", "upper_bound_inflection_rate",
    "window_shape",
]
