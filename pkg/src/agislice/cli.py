"""Command-line front end: analyze, simulate, optimize and sweep.

Every output starts with one ``#`` line holding the resolved configuration,
seed and mode as JSON, so a run can be repeated from its output alone.
Exit codes: 1 bad config, 2 infeasible or unstable model, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import secrets
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import foci as foci_mod
from . import mana as mana_mod
from . import optimizer as opt
from . import simulator as sim
from .errors import ConfigError, UnstableQueueError
from .model import RunConfig, config_to_mapping, load_config, sweep_axis, with_override

MODES = ("analyze", "simulate", "optimize", "sweep")
INNER_MODES = ("analyze", "simulate", "optimize")

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_IO = 0, 1, 2, 3

ANALYZE_COLUMNS = (
    "p_acc", "p_acc_lower", "p_acc_upper", "normalized_demand", "saddle_hap_rate",
    "mana_mean_service", "mana_service_second_moment", "mana_thinned_arrival",
    "mana_mg1_delay", "mana_md1_delay", "p_hit", "rho", "foci_thinned_arrival",
    "foci_delay", "foci_cache_utilization", "foci_saturate_rate",
)
SIMULATE_COLUMNS = (
    "p_acc", "sim_p_acc", "sim_p_acc_se",
    "mana_mg1_delay", "sim_mana_delay_all", "sim_mana_delay_all_se",
    "mana_md1_delay", "sim_mana_delay_served", "sim_mana_delay_served_se",
    "mana_mean_remaining", "sim_mana_mean_remaining", "sim_mana_mean_remaining_se",
    "mana_utilization", "sim_mana_utilization", "sim_mana_little_gap",
    "p_hit", "sim_p_hit", "sim_p_hit_se",
    "foci_delay", "sim_foci_delay", "sim_foci_delay_se",
    "foci_utilization", "sim_foci_utilization", "sim_foci_little_gap", "sim_occupancy_tv",
    "vehicles", "chain_transitions", "requests",
)
OPTIMIZE_COLUMNS = (
    "scheme", "regime", "feasible", "c_m", "r_hm", "r_rm", "c_p", "r_hp", "r_rp",
    "objective", "rsu_used", "rsu_saving", "p_acc", "p_hit", "mana_delay", "foci_delay", "reason",
)
COLUMNS = {"analyze": ANALYZE_COLUMNS, "simulate": SIMULATE_COLUMNS, "optimize": OPTIMIZE_COLUMNS}


class ModelError(Exception):
    """Infeasible or unstable model; maps to exit code 2."""


# -- per-mode rows ---------------------------------------------------------------

def analyze_rows(cfg: RunConfig) -> list[dict]:
    mob = cfg.mobility
    ma = mana_mod.analyze_mana(cfg.mana, mob)
    fa = foci_mod.analyze_foci(cfg.foci)
    saddle = mana_mod.saddle_hap_rate(cfg.mana, mob) if cfg.mana.cache_slots else math.nan
    return [{
        "p_acc": ma.p_acc, "p_acc_lower": ma.p_acc_lower, "p_acc_upper": ma.p_acc_upper,
        "normalized_demand": ma.x, "saddle_hap_rate": saddle,
        "mana_mean_service": ma.mean_service, "mana_service_second_moment": ma.service_second_moment,
        "mana_thinned_arrival": ma.thinned_arrival, "mana_mg1_delay": ma.mg1_delay,
        "mana_md1_delay": ma.md1_delay, "p_hit": fa.hit_ratio, "rho": fa.rho,
        "foci_thinned_arrival": fa.thinned_arrival, "foci_delay": fa.mean_delay,
        "foci_cache_utilization": fa.cache_utilization,
        "foci_saturate_rate": foci_mod.saturate_rate(cfg.foci),
    }]


def simulate_rows(cfg: RunConfig, seed: int) -> list[dict]:
    run, mob = cfg.run, cfg.mobility
    ma = mana_mod.analyze_mana(cfg.mana, mob)
    fa = foci_mod.analyze_foci(cfg.foci)
    try:
        ms = sim.simulate_mana(cfg.mana, mob, sim.SimControl(seed, run.warmup_fraction, run.vehicles))
        fs = sim.simulate_foci(cfg.foci, sim.SimControl(seed, run.warmup_fraction, run.transitions),
                               requests=run.requests)
    except UnstableQueueError as exc:
        raise ModelError(f"refusing to simulate an unstable queue: {exc}") from exc
    chain = foci_mod.cache_steady_state(fa.rho, cfg.foci.cache_slots)
    return [{
        "p_acc": ma.p_acc, "sim_p_acc": ms.empirical_p_acc.mean, "sim_p_acc_se": ms.empirical_p_acc.se,
        "mana_mg1_delay": ma.mg1_delay, "sim_mana_delay_all": ms.empirical_mean_delay_all.mean,
        "sim_mana_delay_all_se": ms.empirical_mean_delay_all.se,
        "mana_md1_delay": ma.md1_delay, "sim_mana_delay_served": ms.empirical_mean_delay_served.mean,
        "sim_mana_delay_served_se": ms.empirical_mean_delay_served.se,
        "mana_mean_remaining": ma.mean_service * cfg.mana.rsu_rate,
        "sim_mana_mean_remaining": ms.empirical_mean_remaining.mean,
        "sim_mana_mean_remaining_se": ms.empirical_mean_remaining.se,
        "mana_utilization": sim.mana_utilization(cfg.mana, mob),
        "sim_mana_utilization": ms.utilization, "sim_mana_little_gap": ms.little_gap,
        "p_hit": fa.hit_ratio, "sim_p_hit": fs.empirical_hit_ratio.mean,
        "sim_p_hit_se": fs.empirical_hit_ratio.se,
        "foci_delay": fa.mean_delay, "sim_foci_delay": fs.empirical_mean_delay.mean,
        "sim_foci_delay_se": fs.empirical_mean_delay.se,
        "foci_utilization": sim.foci_utilization(cfg.foci), "sim_foci_utilization": fs.utilization,
        "sim_foci_little_gap": fs.little_gap,
        "sim_occupancy_tv": sim.total_variation(fs.empirical_occupancy, chain),
        "vehicles": ms.vehicles_simulated, "chain_transitions": fs.events_simulated,
        "requests": fs.requests_simulated,
    }]


def optimize_rows(cfg: RunConfig) -> list[dict]:
    if cfg.budget is None:
        raise ConfigError("budget", "optimize needs a [budget] section")
    demand = opt.SliceDemand.from_config(cfg)
    rows = []
    for res in opt.comparison_schemes(cfg.budget, demand, cfg.grid):
        s = res.solution
        rows.append({
            "scheme": res.scheme, "regime": opt.allocation_regime(s), "feasible": s.feasible,
            "c_m": s.c_m, "r_hm": s.r_hm, "r_rm": s.r_rm, "c_p": s.c_p, "r_hp": s.r_hp,
            "r_rp": s.r_rp, "objective": s.objective, "rsu_used": s.rsu_used,
            "rsu_saving": res.rsu_saving, "p_acc": s.p_acc, "p_hit": s.p_hit,
            "mana_delay": s.mana_delay, "foci_delay": s.foci_delay, "reason": s.reason,
        })
    return rows


def run_mode(mode: str, cfg: RunConfig, seed: int | None) -> list[dict]:
    if mode == "analyze":
        return analyze_rows(cfg)
    if mode == "simulate":
        return simulate_rows(cfg, seed)
    if mode == "optimize":
        return optimize_rows(cfg)
    raise ValueError(f"unknown mode {mode!r}")


def _sweep_point(args):
    mode, cfg, seed, assignment = args
    for key, value in assignment:
        cfg = with_override(cfg, key, value)
    rows = run_mode(mode, cfg, seed)
    prefix = dict(assignment)
    return [{**prefix, **r} for r in rows]


def sweep_rows(inner: str, cfg: RunConfig, seed: int | None, axes, workers: int = 1) -> list[dict]:
    """Cartesian product of the axes, rows in sweep order whatever the worker count."""
    keys = [k for k, _ in axes]
    points = [tuple(zip(keys, combo)) for combo in itertools.product(*(v for _, v in axes))]
    jobs = [(inner, cfg, seed, p) for p in points]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_point, jobs))
    else:
        chunks = [_sweep_point(j) for j in jobs]
    return [row for chunk in chunks for row in chunk]


# -- output ------------------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)  # 'inf', '-inf', 'nan'
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def metadata(mode: str, inner: str | None, cfg: RunConfig, seed: int | None, axes) -> dict:
    meta = {"mode": mode, "seed": seed, "config": config_to_mapping(cfg)}
    if mode == "sweep":
        meta["inner"] = inner
        meta["sweep"] = [[k, list(v)] for k, v in axes]
    return _json_safe(meta)


def render_csv(meta: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r[c]) for c in columns])
    return buf.getvalue()


def render_json(meta: dict, columns, rows) -> str:
    body = {"meta": meta, "columns": list(columns),
            "rows": [{c: _json_safe(r[c]) for c in columns} for r in rows]}
    return json.dumps(body, sort_keys=True, indent=1) + "\n"


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agislice", description=__doc__.splitlines()[0])
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="INI config file")
    p.add_argument("--out", required=True, help="output file (CSV unless --json)")
    p.add_argument("--seed", type=int, help="simulation seed (overrides [run] seed)")
    p.add_argument("--sweep", action="append", default=[], metavar="KEY=VALUES",
                   help="sweep axis, e.g. mana.hap_rate=10Mbps:50Mbps:10Mbps (repeatable)")
    p.add_argument("--inner", choices=INNER_MODES, default="analyze",
                   help="mode evaluated at each sweep point")
    p.add_argument("--workers", type=int, help="worker processes for sweeps")
    p.add_argument("--json", action="store_true", help="write JSON instead of CSV")
    return p


def _axes(cfg: RunConfig, specs: list[str]):
    axes = list(cfg.sweep)
    for spec in specs:
        key, sep, values = spec.partition("=")
        if not sep:
            raise ConfigError(spec, "sweep must look like section.key=values")
        axis = sweep_axis(key.strip(), values)
        axes = [a for a in axes if a[0] != axis[0]] + [axis]
    return axes


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        axes = _axes(cfg, args.sweep)
        if args.mode == "sweep" and not axes:
            raise ConfigError("sweep", "sweep mode needs --sweep or a [sweep] section")
        inner = args.inner if args.mode == "sweep" else args.mode
        seed = args.seed if args.seed is not None else cfg.run.seed
        if inner == "simulate" and seed is None:
            seed = secrets.randbits(63)  # recorded in the header
        if seed is not None:
            cfg = replace(cfg, run=replace(cfg.run, seed=seed))
        if inner != "simulate":
            seed = None
        workers = args.workers if args.workers is not None else cfg.run.workers
        if workers < 1:
            raise ConfigError("workers", "must be at least 1")
        if args.mode == "sweep":
            rows = sweep_rows(inner, cfg, seed, axes, workers)
        else:
            rows = run_mode(inner, cfg, seed)
    except (ModelError, UnstableQueueError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ValueError as exc:  # includes ConfigError
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    columns = COLUMNS[inner]
    if args.mode == "sweep":
        columns = tuple(k for k, _ in axes) + columns
    meta = metadata(args.mode, inner, cfg, seed, axes)
    text = (render_json if args.json else render_csv)(meta, columns, rows)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO

    if inner == "optimize":
        optimal = [r for r in rows if r["scheme"] == "optimal"]
        bad = sum(not r["feasible"] for r in optimal)
        if bad == len(optimal):
            print("model error: no feasible allocation within the RSU budget", file=sys.stderr)
            return EXIT_MODEL
        if bad:
            print(f"warning: {bad} of {len(optimal)} budgets infeasible (see 'reason' column)",
                  file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
