"""Exhaustive search of the joint slicing problem and the comparison schemes.

For a fixed push allocation (C_m, R_HM, C_p, R_HP) the smallest RSU rates
meeting both delay targets are closed form, so only the four push variables
are searched.  The MaNa part of the objective depends on (C_m, R_HM) only and
the FoCI part on (C_p, R_HP) only, so each slice is tabulated once and the
4-D grid is scored by broadcasting.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import foci as foci_mod
from . import mana as mana_mod
from .model import (FociConfig, GridSpec, ManaConfig, MobilityProfile, ResourceBudget,
                    RunConfig, SlicingSolution)

SCHEMES = ("optimal", "fair_ratio", "mana_only", "foci_only", "no_push")
_REL = 1e-12  # slack on budget comparisons for grid values built from decimals


class SliceDemand(NamedTuple):
    mobility: MobilityProfile
    mana: ManaConfig
    foci: FociConfig

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "SliceDemand":
        return cls(cfg.mobility, cfg.mana, cfg.foci)


@dataclass(frozen=True)
class SchemeResult:
    scheme: str
    solution: SlicingSolution
    rsu_saving: float


def mana_rate(demand: SliceDemand, c_m: int, r_hm: float) -> tuple[float, float]:
    """(P_acc, minimal R_RM) for one MaNa push allocation."""
    cfg = replace(demand.mana, cache_slots=int(c_m), hap_rate=float(r_hm))
    p_acc = mana_mod.accomplishment_ratio(cfg, demand.mobility)
    rate = mana_mod.min_rsu_rate_mana(p_acc, demand.mobility.vehicle_arrival_rate,
                                      cfg.delay_target, cfg.map_size)
    return p_acc, rate


def foci_rate(demand: SliceDemand, c_p: int, r_hp: float) -> tuple[float, float]:
    """(P_hit, minimal R_RP) for one FoCI push allocation."""
    cfg = demand.foci
    rho = math.inf if r_hp == 0 else cfg.expire_rate * cfg.file_size / r_hp
    p_hit = foci_mod.hit_ratio(cfg.popularity, rho, int(c_p))
    rate = foci_mod.min_rsu_rate_foci(p_hit, cfg.request_rate, cfg.delay_target, cfg.file_size)
    return p_hit, rate


def _fits(used: float, total: float) -> bool:
    return used <= total * (1 + _REL) + 1e-9


def min_total_rsu(point, demand: SliceDemand, budget: ResourceBudget) -> SlicingSolution:
    """Minimal RSU rates for a push allocation ``(C_m, R_HM, C_p, R_HP)``.

    Infeasible points come back with ``feasible=False`` and a reason; when only
    the RSU budget is exceeded the rates are still reported.
    """
    c_m, r_hm, c_p, r_hp = point
    c_m, c_p = int(c_m), int(c_p)
    if min(c_m, r_hm, c_p, r_hp) < 0:
        raise ValueError(f"allocation must be non-negative, got {point}")
    nan = math.nan

    def infeasible(reason):
        return SlicingSolution(c_m, float(r_hm), nan, c_p, float(r_hp), nan, -math.inf,
                               nan, nan, False, nan, nan, reason)

    cache = demand.mana.map_size * c_m + demand.foci.file_size * c_p
    if not _fits(cache, budget.vehicle_cache):
        return infeasible("vehicle cache exceeded")
    if not _fits(budget.block_count * r_hm + r_hp, budget.hap_total):
        return infeasible("HAP rate exceeded")
    if c_p > demand.foci.popularity.files:
        return infeasible("more FoCI slots than files")

    p_acc, r_rm = mana_rate(demand, c_m, r_hm)
    p_hit, r_rp = foci_rate(demand, c_p, r_hp)
    lam_v = mana_mod.thinned_arrival(p_acc, demand.mobility.vehicle_arrival_rate)
    lam_p = foci_mod.thinned_arrival(p_hit, demand.foci.request_rate)
    w_m = mana_mod.md1_sojourn(lam_v, demand.mana.map_size / r_rm)
    w_p = foci_mod.foci_delay(lam_p, demand.foci.file_size, r_rp)
    objective = budget.rsu_total - r_rm - r_rp
    ok = r_rm + r_rp <= budget.rsu_total
    return SlicingSolution(c_m, float(r_hm), r_rm, c_p, float(r_hp), r_rp, objective,
                           w_m, w_p, ok, p_acc, p_hit, "" if ok else "RSU rate exceeded")


def check_solution(sol: SlicingSolution, demand: SliceDemand, budget: ResourceBudget,
                   rel_tol: float = 1e-9) -> list[str]:
    """Independently re-check the five problem constraints; returns violations."""
    problems = []
    mcfg = replace(demand.mana, cache_slots=sol.c_m, hap_rate=sol.r_hm, rsu_rate=sol.r_rm)
    try:
        w_m = mana_mod.md1_delay_bound(mcfg, demand.mobility)
    except Exception as exc:  # unstable or undefined
        problems.append(f"MaNa delay undefined: {exc}")
    else:
        if w_m > demand.mana.delay_target * (1 + rel_tol):
            problems.append(f"MaNa delay {w_m} > {demand.mana.delay_target}")
    fcfg = replace(demand.foci, cache_slots=sol.c_p, hap_rate=sol.r_hp, rsu_rate=sol.r_rp)
    fa = foci_mod.analyze_foci(fcfg)
    if fa.mean_delay > demand.foci.delay_target * (1 + rel_tol):
        problems.append(f"FoCI delay {fa.mean_delay} > {demand.foci.delay_target}")
    cache = demand.mana.map_size * sol.c_m + demand.foci.file_size * sol.c_p
    if not _fits(cache, budget.vehicle_cache):
        problems.append(f"cache {cache} > {budget.vehicle_cache}")
    hap = budget.block_count * sol.r_hm + sol.r_hp
    if not _fits(hap, budget.hap_total):
        problems.append(f"HAP rate {hap} > {budget.hap_total}")
    if sol.r_rm + sol.r_rp > budget.rsu_total:
        problems.append(f"RSU rate {sol.r_rm + sol.r_rp} > {budget.rsu_total}")
    return problems


class _Tables:
    """Per-slice RSU-rate tables over the grid axes."""

    def __init__(self, demand: SliceDemand, grid: GridSpec):
        self.c_m = np.array(grid.c_m_values, dtype=int)
        self.r_hm = np.array(grid.r_hm_values, dtype=float)
        self.c_p = np.array(grid.c_p_values, dtype=int)
        self.r_hp = np.array(grid.r_hp_values, dtype=float)
        self.c_p = self.c_p[self.c_p <= demand.foci.popularity.files]
        self.rm = np.array([[mana_rate(demand, c, r)[1] for r in self.r_hm] for c in self.c_m])
        self.rp = np.array([[foci_rate(demand, c, r)[1] for r in self.r_hp] for c in self.c_p])


@functools.lru_cache(maxsize=16)
def _tables(demand: SliceDemand, grid: GridSpec) -> _Tables:
    # budgets vary across a sweep while demand and grid usually do not
    return _Tables(demand, grid)


def _pick(score, hap, cache, valid):
    """Flat index of the best valid entry: max score, then min HAP, min cache, grid order."""
    if not valid.any():
        return None
    s = np.where(valid, score, -np.inf)
    cand = s == s.max()
    h = np.where(cand, hap, np.inf)
    cand &= h == h.min()
    c = np.where(cand, cache, np.inf)
    cand &= c == c.min()
    return int(np.flatnonzero(cand)[0])


def _best_slice(rates, sizes, rates_axis, size_unit, hap_weight, cache_cap, hap_cap):
    """Best (slots, rate) for one slice within its cache/HAP shares."""
    cache = (sizes * size_unit)[:, None] + 0 * rates_axis[None, :]
    hap = hap_weight * rates_axis[None, :] + 0 * cache
    valid = (cache <= cache_cap * (1 + _REL) + 1e-9) & (hap <= hap_cap * (1 + _REL) + 1e-9)
    k = _pick(-rates, hap, cache, valid)
    if k is None:
        return 0, 0.0
    i, j = np.unravel_index(k, rates.shape)
    return int(sizes[i]), float(rates_axis[j])


def _result(scheme, sol, baseline_used):
    saving = 1.0 - sol.rsu_used / baseline_used if baseline_used > 0 else 0.0
    return SchemeResult(scheme, sol, saving)


def fair_weight(demand: SliceDemand) -> float:
    """MaNa share of cache and HAP rate: its fraction of offered RSU bit load."""
    m = demand.mobility.vehicle_arrival_rate * demand.mana.map_size
    p = demand.foci.request_rate * demand.foci.file_size
    return 0.5 if m + p == 0 else m / (m + p)


def _no_push(demand, budget):
    return min_total_rsu((0, 0.0, 0, 0.0), demand, budget)


def solve_p1(budget: ResourceBudget, demand: SliceDemand, grid: GridSpec | None = None,
             tables: _Tables | None = None) -> SchemeResult:
    """Best joint allocation over the grid (the ``optimal`` scheme)."""
    grid = grid or GridSpec.default()
    t = tables or _tables(demand, grid)
    lm, lp, n = demand.mana.map_size, demand.foci.file_size, budget.block_count
    cache = (lm * t.c_m)[:, None, None, None] + (lp * t.c_p)[None, None, :, None]
    hap = (n * t.r_hm)[None, :, None, None] + t.r_hp[None, None, None, :]
    cache = np.broadcast_to(cache, (len(t.c_m), len(t.r_hm), len(t.c_p), len(t.r_hp)))
    hap = np.broadcast_to(hap, cache.shape)
    score = budget.rsu_total - t.rm[:, :, None, None] - t.rp[None, None, :, :]
    valid = ((cache <= budget.vehicle_cache * (1 + _REL) + 1e-9)
             & (hap <= budget.hap_total * (1 + _REL) + 1e-9))
    k = _pick(score, hap, cache, valid)
    base = _no_push(demand, budget)
    if k is None:  # possible only when the grid lacks the zero allocation
        sol = replace(base, feasible=False, reason="no grid point satisfies cache/HAP budgets")
        return _result("optimal", sol, base.rsu_used)
    a, b, c, d = np.unravel_index(k, score.shape)
    sol = min_total_rsu((t.c_m[a], t.r_hm[b], t.c_p[c], t.r_hp[d]), demand, budget)
    return _result("optimal", sol, base.rsu_used)


def comparison_schemes(budget: ResourceBudget, demand: SliceDemand,
                       grid: GridSpec | None = None) -> list[SchemeResult]:
    """optimal, fair_ratio, mana_only, foci_only and no_push, in that order."""
    grid = grid or GridSpec.default()
    t = _tables(demand, grid)
    lm, lp, n = demand.mana.map_size, demand.foci.file_size, budget.block_count
    base = _no_push(demand, budget)
    used0 = base.rsu_used

    def mana_best(cache_cap, hap_cap):
        return _best_slice(t.rm, t.c_m, t.r_hm, lm, n, cache_cap, hap_cap)

    def foci_best(cache_cap, hap_cap):
        return _best_slice(t.rp, t.c_p, t.r_hp, lp, 1.0, cache_cap, hap_cap)

    w = fair_weight(demand)
    lv, rh = budget.vehicle_cache, budget.hap_total
    results = [solve_p1(budget, demand, grid, t)]
    fm = mana_best(w * lv, w * rh)
    ff = foci_best((1 - w) * lv, (1 - w) * rh)
    results.append(_result("fair_ratio", min_total_rsu(fm + ff, demand, budget), used0))
    results.append(_result("mana_only", min_total_rsu(mana_best(lv, rh) + (0, 0.0), demand, budget), used0))
    results.append(_result("foci_only", min_total_rsu((0, 0.0) + foci_best(lv, rh), demand, budget), used0))
    results.append(_result("no_push", base, used0))
    return results


def allocation_regime(sol: SlicingSolution) -> str:
    """Which pushed slices hold resources: 'mana', 'foci', 'shared' or 'none'."""
    mana_on = sol.c_m > 0 and sol.r_hm > 0
    foci_on = sol.c_p > 0 and sol.r_hp > 0
    if mana_on and foci_on:
        return "shared"
    if mana_on:
        return "mana"
    if foci_on:
        return "foci"
    return "none"
