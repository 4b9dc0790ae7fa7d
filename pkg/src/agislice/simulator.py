"""Seeded Monte Carlo checks of the MaNa and FoCI closed forms.

Each RSU is a tagged FIFO queue fed by Poisson arrivals with i.i.d. service
demands, the same assumptions the analysis makes.  MaNa vehicles draw a route
position J and a HAP window made of individual exponential dwell phases; FoCI
runs the birth-death cache chain event by event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import foci as foci_mod
from . import mana as mana_mod
from .errors import UnstableQueueError
from .model import FociConfig, ManaConfig, MobilityProfile

BATCHES = 20
_CHUNK = 20_000

# default stream ids; callers may swap them to check stream separation
MOBILITY_STREAM = 1
MANA_ARRIVAL_STREAM = 2
CHAIN_STREAM = 3
REQUEST_STREAM = 4


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Deterministic generator for ``(seed, stream_id)``; distinct ids are independent."""
    if int(seed) != seed or seed < 0 or int(stream_id) != stream_id or stream_id < 0:
        raise ValueError("seed and stream_id must be non-negative integers")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SimControl:
    seed: int
    warmup_fraction: float = 0.1
    horizon: int = 100_000

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not 0 <= self.warmup_fraction < 1:
            raise ValueError(f"warmup_fraction must lie in [0, 1), got {self.warmup_fraction!r}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon!r}")


class Estimate(NamedTuple):
    mean: float
    se: float  # batch-means standard error


def batch_estimate(values, batches: int = BATCHES) -> Estimate:
    """Sample mean with a batch-means standard error over contiguous batches."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return Estimate(math.nan, math.nan)
    k = min(batches, v.size)
    if k < 2:
        return Estimate(float(v.mean()), math.nan)
    means = np.array([b.mean() for b in np.array_split(v, k)])
    return Estimate(float(v.mean()), float(means.std(ddof=1) / math.sqrt(k)))


@dataclass(frozen=True)
class QueueStats:
    sojourn: np.ndarray  # post-warmup customers, arrival order
    mean_in_system: float  # time average over the measurement window
    arrival_rate: float  # customers per second arriving in the window
    utilization: float

    @property
    def little_gap(self) -> float:
        """Relative gap between L and lambda * W."""
        lw = self.arrival_rate * float(self.sojourn.mean()) if self.sojourn.size else 0.0
        if lw == 0:
            return 0.0 if self.mean_in_system == 0 else math.inf
        return abs(self.mean_in_system - lw) / lw


def fifo_queue(arrivals: np.ndarray, services: np.ndarray, warmup: int) -> QueueStats:
    """Single-server FIFO by the Lindley recursion; customers before ``warmup`` are discarded."""
    n = len(arrivals)
    dep = np.empty(n)
    last = -math.inf
    for i, (a, s) in enumerate(zip(arrivals.tolist(), services.tolist())):
        last = (a if a > last else last) + s
        dep[i] = last
    soj = dep[warmup:] - arrivals[warmup:]
    if n - warmup < 2:
        return QueueStats(soj, math.nan, math.nan, math.nan)
    t0, t1 = arrivals[warmup], arrivals[-1]
    span = t1 - t0
    if span <= 0:
        return QueueStats(soj, math.nan, math.nan, math.nan)
    # area under N(t) on [t0, t1): each customer contributes its overlap with the window
    overlap = np.clip(np.minimum(dep, t1) - np.maximum(arrivals, t0), 0.0, None)
    in_window = (arrivals >= t0) & (arrivals < t1)
    start = dep - services
    busy = np.clip(np.minimum(dep, t1) - np.maximum(start, t0), 0.0, None)
    return QueueStats(soj, float(overlap.sum() / span), float(in_window.sum() / span),
                      float(busy.sum() / span))


def _poisson_epochs(rng: np.random.Generator, rate: float, n: int) -> np.ndarray:
    return np.cumsum(rng.exponential(1.0 / rate, size=n))


# -- MaNa ----------------------------------------------------------------------

@dataclass(frozen=True)
class ManaSimReport:
    vehicles_simulated: int
    vehicles_measured: int
    empirical_p_acc: Estimate
    empirical_mean_delay_all: Estimate
    empirical_mean_delay_served: Estimate
    empirical_mean_remaining: Estimate
    utilization: float
    mean_in_system: float
    arrival_rate: float

    @property
    def little_gap(self) -> float:
        lw = self.arrival_rate * self.empirical_mean_delay_all.mean
        return abs(self.mean_in_system - lw) / lw if lw > 0 else 0.0


def mana_utilization(cfg: ManaConfig, mob: MobilityProfile) -> float:
    if cfg.rsu_rate <= 0:
        return math.inf
    return mob.vehicle_arrival_rate * mana_mod.remaining_moments(cfg, mob)[0] / cfg.rsu_rate


def sample_remaining(cfg: ManaConfig, mob: MobilityProfile, n: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Map bits still missing on block entry for ``n`` independent vehicles."""
    cdf = np.cumsum(mob.route_dist)
    cdf[-1] = 1.0
    out = np.empty(n)
    k, mu, c = mob.erlang_shape, mob.erlang_rate, cfg.cache_slots
    for lo in range(0, n, _CHUNK):
        m = min(_CHUNK, n - lo)
        j = np.searchsorted(cdf, rng.random(m), side="right") + 1  # block index, 1-based
        phases = k * np.minimum(j - 1, c)
        width = k * c
        if width:
            dwell = rng.exponential(1.0 / mu, size=(m, width))
            mask = np.arange(width)[None, :] < phases[:, None]
            window = np.where(mask, dwell, 0.0).sum(axis=1)
        else:
            window = np.zeros(m)
        if cfg.hap_rate == 0:
            out[lo:lo + m] = cfg.map_size
        else:
            out[lo:lo + m] = np.maximum(0.0, cfg.map_size - cfg.hap_rate * window)
    return out


def simulate_mana(cfg: ManaConfig, mob: MobilityProfile, ctl: SimControl, *,
                  allow_unstable: bool = False,
                  streams: tuple[int, int] = (MOBILITY_STREAM, MANA_ARRIVAL_STREAM)) -> ManaSimReport:
    """Tagged-RSU simulation of map prefetching and the RSU's FIFO queue.

    Every vehicle joins the queue; those with a complete map need zero service.
    """
    if cfg.rsu_rate <= 0:
        raise UnstableQueueError(math.inf, "MaNa RSU queue (rsu_rate = 0)")
    util = mana_utilization(cfg, mob)
    if util >= 1 and not allow_unstable:
        raise UnstableQueueError(util, "MaNa RSU queue")
    n = int(ctl.horizon)
    mob_rng = rng_stream(ctl.seed, streams[0])
    arr_rng = rng_stream(ctl.seed, streams[1])
    remaining = sample_remaining(cfg, mob, n, mob_rng)
    arrivals = _poisson_epochs(arr_rng, mob.vehicle_arrival_rate, n)
    warm = int(ctl.warmup_fraction * n)
    q = fifo_queue(arrivals, remaining / cfg.rsu_rate, warm)
    rem = remaining[warm:]
    served = rem > 0
    return ManaSimReport(
        vehicles_simulated=n,
        vehicles_measured=n - warm,
        empirical_p_acc=batch_estimate(~served),
        empirical_mean_delay_all=batch_estimate(q.sojourn),
        empirical_mean_delay_served=batch_estimate(q.sojourn[served]),
        empirical_mean_remaining=batch_estimate(rem),
        utilization=q.utilization,
        mean_in_system=q.mean_in_system,
        arrival_rate=q.arrival_rate,
    )


# -- FoCI ----------------------------------------------------------------------

@dataclass(frozen=True)
class FociSimReport:
    events_simulated: int
    requests_simulated: int
    empirical_occupancy: tuple[float, ...]
    empirical_hit_ratio: Estimate
    empirical_mean_delay: Estimate
    misses: int
    utilization: float
    mean_in_system: float
    arrival_rate: float

    @property
    def little_gap(self) -> float:
        lw = self.arrival_rate * self.empirical_mean_delay.mean
        return abs(self.mean_in_system - lw) / lw if lw > 0 else 0.0


def foci_utilization(cfg: FociConfig) -> float:
    if cfg.rsu_rate <= 0:
        return math.inf
    p_hit = foci_mod.hit_ratio(cfg.popularity, foci_mod.inverse_update_rate(cfg), cfg.cache_slots)
    return cfg.request_rate * (1 - p_hit) * cfg.file_size / cfg.rsu_rate


def simulate_chain(cfg: FociConfig, transitions: int, rng: np.random.Generator,
                   death_per_file: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Path of the valid-file count: (states, holding times), starting empty.

    ``death_per_file`` switches to a death rate of i * mu_p (each cached file
    expiring on its own), which is not the model the closed forms describe.
    """
    c = cfg.cache_slots
    birth = cfg.hap_rate / cfg.file_size
    mu = cfg.expire_rate
    states = np.empty(transitions + 1, dtype=np.int64)
    holds = np.empty(transitions + 1)
    exp = rng.exponential(1.0, size=transitions + 1).tolist()
    uni = rng.random(transitions + 1).tolist()
    i = 0
    for t in range(transitions + 1):
        b = birth if i < c else 0.0
        d = (mu * i if death_per_file else mu) if i > 0 else 0.0
        total = b + d
        states[t] = i
        if total == 0:  # absorbing: the path stays here
            holds[t] = 1.0
            return states[:t + 1], holds[:t + 1]
        holds[t] = exp[t] / total
        i = i + 1 if uni[t] * total < b else i - 1
    return states, holds


def simulate_foci(cfg: FociConfig, ctl: SimControl, *, requests: int | None = None,
                  allow_unstable: bool = False, death_per_file: bool = False,
                  correlated_requests: bool = False,
                  streams: tuple[int, int] = (CHAIN_STREAM, REQUEST_STREAM)) -> FociSimReport:
    """Cache-chain and RSU-queue simulation for the FoCI slice.

    ``ctl.horizon`` counts chain transitions; ``requests`` (default: the same
    number) counts Poisson requests.  By default each request comes from a
    different vehicle, so it sees the chain at an independent time point of
    the simulated path.  With ``correlated_requests`` all requests come from
    the one simulated vehicle, at Poisson epochs along its own path.
    """
    if cfg.request_rate <= 0:
        raise ValueError("request_rate must be positive to simulate requests")
    if cfg.rsu_rate <= 0:
        raise UnstableQueueError(math.inf, "FoCI RSU queue (rsu_rate = 0)")
    util = foci_utilization(cfg)
    if util >= 1 and not allow_unstable:
        raise UnstableQueueError(util, "FoCI RSU queue")
    chain_rng = rng_stream(ctl.seed, streams[0])
    req_rng = rng_stream(ctl.seed, streams[1])
    n_req = int(ctl.horizon if requests is None else requests)
    if n_req < 1:
        raise ValueError("requests must be positive")

    states, holds = simulate_chain(cfg, int(ctl.horizon), chain_rng, death_per_file)
    warm = int(ctl.warmup_fraction * len(states)) if len(states) > 1 else 0
    states, holds = states[warm:], holds[warm:]
    occupancy = np.bincount(states, weights=holds, minlength=cfg.cache_slots + 1)
    occupancy /= occupancy.sum()
    ends = np.cumsum(holds)

    times = _poisson_epochs(req_rng, cfg.request_rate, n_req)
    if correlated_requests:
        times = times[times < ends[-1]]
        looked_up = times
    else:
        looked_up = req_rng.random(n_req) * ends[-1]
    idx = np.minimum(np.searchsorted(ends, looked_up, side="right"), len(ends) - 1)
    prefix = np.concatenate([[0.0], np.cumsum(cfg.popularity.probabilities[:cfg.cache_slots])])
    hit = req_rng.random(len(times)) < prefix[states[idx]]

    miss_times = times[~hit]
    q_warm = int(ctl.warmup_fraction * len(miss_times))
    q = fifo_queue(miss_times, np.full(len(miss_times), cfg.file_size / cfg.rsu_rate), q_warm)
    return FociSimReport(
        events_simulated=len(states) + warm - 1,
        requests_simulated=len(times),
        empirical_occupancy=tuple(float(v) for v in occupancy),
        empirical_hit_ratio=batch_estimate(hit),
        empirical_mean_delay=batch_estimate(q.sojourn),
        misses=int(len(miss_times)),
        utilization=q.utilization,
        mean_in_system=q.mean_in_system,
        arrival_rate=q.arrival_rate,
    )


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


__all__ = [
    "Estimate", "FociSimReport", "ManaSimReport", "QueueStats", "SimControl", "batch_estimate",
    "fifo_queue", "foci_utilization", "mana_utilization", "rng_stream", "sample_remaining",
    "simulate_chain", "simulate_foci", "simulate_mana", "total_variation",
]
