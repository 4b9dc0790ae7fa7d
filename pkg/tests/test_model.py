import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agislice.errors import ConfigError
from agislice.model import (GeometricRoute, GridSpec, ManaConfig, MobilityProfile, Popularity,
                            ResourceBudget, RunSettings, config_from_mapping, config_to_mapping,
                            dump_config, parse_config, parse_quantity, parse_values, validate,
                            with_override)
from conftest import TABLE1


def test_table1_map_slice_accepted(table1):
    m = table1.mana
    assert (m.map_size, m.cache_slots, m.delay_target) == (5e9, 10, 1.0)
    assert validate(m) is m


def test_negative_arrival_rate_rejected():
    with pytest.raises(ConfigError, match="vehicle_arrival_rate must be positive"):
        MobilityProfile.geometric(-1.0, 5, 0.2, 0.9)


def test_unnormalized_popularity_rejected():
    with pytest.raises(ConfigError, match="probabilities must sum to 1"):
        Popularity((0.5, 0.5, 0.1))


def test_popularity_must_be_ranked():
    with pytest.raises(ConfigError):
        Popularity((0.2, 0.8))


@pytest.mark.parametrize("text,kind,expected", [
    ("1 Gb", "size", 1e9), ("5Gb", "size", 5e9), ("1 Mbps", "rate", 1e6),
    ("20 Mbps", "rate", 2e7), ("10 Gbps", "rate", 1e10), ("0.2 /s", "freq", 0.2),
    ("250 ms", "time", 0.25), ("2 min", "time", 120.0), ("1.2", "freq", 1.2),
])
def test_units(text, kind, expected):
    assert parse_quantity(text, kind) == expected


@given(st.integers(0, 10**6), st.sampled_from(["kb", "Mb", "Gb", "Tb"]))
def test_integer_unit_conversions_exact(n, unit):
    scale = {"kb": 10**3, "Mb": 10**6, "Gb": 10**9, "Tb": 10**12}[unit]
    assert parse_quantity(f"{n} {unit}", "size") == float(n * scale)


def test_unknown_unit_names_field():
    with pytest.raises(ConfigError, match="mana.map_size"):
        parse_quantity("5 parsecs", "size", "mana.map_size")


def test_ranges_are_inclusive_and_decimal_exact():
    assert parse_values("0 Mbps:1 Mbps:0.1 Mbps", "rate", "r") == [k * 1e5 for k in range(11)]
    assert parse_values("3, 5, 10", "number", "c") == [3, 5, 10]
    with pytest.raises(ConfigError):
        parse_values("1:2", "number", "c")


def test_route_truncation():
    route = GeometricRoute(0.9)
    g = route.probabilities()
    assert math.isclose(sum(g), 1.0, abs_tol=1e-12)
    assert g[0] == pytest.approx(0.1, rel=1e-8)
    assert route.mean_length == pytest.approx(10.0)
    # truncation point: first J_max whose remaining tail is below 1e-9
    assert 0.9 ** len(g) < 1e-9 <= 0.9 ** (len(g) - 1)


def test_route_dist_must_sum_to_one():
    with pytest.raises(ConfigError):
        MobilityProfile(1.0, 5, 0.2, (0.5, 0.4))


def test_grid_strictly_increasing():
    with pytest.raises(ConfigError):
        GridSpec((0, 2, 1), (0.0,), (0,), (0.0,))
    assert GridSpec.default().size == 16 * 21 * 21 * 51


def test_foci_slots_capped_by_files(table1):
    with pytest.raises(ConfigError):
        replace(table1.foci, cache_slots=1001)


def test_budget_and_run_validation():
    with pytest.raises(ConfigError):
        ResourceBudget(0.0, 1.0, 1.0, 1)
    with pytest.raises(ConfigError):
        RunSettings(warmup_fraction=1.0)
    with pytest.raises(ConfigError):
        ManaConfig(5e9, -1, 0.0, 1.0, 1.0)


def test_table1_file_round_trip(table1):
    again = parse_config(dump_config(table1))
    assert again == table1
    assert dump_config(again) == dump_config(table1)


finite = st.floats(min_value=1e-6, max_value=1e12, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(lam=finite, mu=finite, size=finite, rate=finite, target=finite,
       psi=st.floats(0.0, 0.95), k=st.integers(1, 20), c=st.integers(0, 30), seed=st.integers(0, 2**63))
def test_round_trip_bit_exact(table1, lam, mu, size, rate, target, psi, k, c, seed):
    cfg = replace(
        table1,
        mobility=MobilityProfile.geometric(lam, k, mu, psi),
        mana=replace(table1.mana, map_size=size, cache_slots=c, hap_rate=rate, delay_target=target),
        run=replace(table1.run, seed=seed),
    )
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert config_to_mapping(again) == config_to_mapping(cfg)


def test_explicit_route_and_popularity_round_trip(table1):
    raw = config_to_mapping(table1)
    raw["mobility"].pop("continue_prob")
    raw["mobility"]["route_dist"] = [0.25, 0.5, 0.25]
    raw["foci"].pop("zipf_files")
    raw["foci"].pop("zipf_skew")
    raw["foci"]["popularity"] = [0.5, 0.3, 0.2]
    raw["foci"]["cache_slots"] = 2
    cfg = config_from_mapping(raw)
    assert parse_config(dump_config(cfg)) == cfg


def test_unknown_section_and_key(table1):
    raw = config_to_mapping(table1)
    raw["mana"]["colour"] = "blue"
    with pytest.raises(ConfigError, match="mana.colour"):
        config_from_mapping(raw)
    raw = config_to_mapping(table1)
    raw["extras"] = {}
    with pytest.raises(ConfigError, match="extras"):
        config_from_mapping(raw)


def test_override_accepts_units(table1):
    cfg = with_override(table1, "mana.hap_rate", "40 Mbps")
    assert cfg.mana.hap_rate == 4e7
    cfg = with_override(table1, "mobility.continue_prob", 0.5)
    assert cfg.mobility.route_dist[0] == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        with_override(table1, "mana.nope", 1)


def test_sweep_section_parsed():
    text = TABLE1.read_text() + "\n[sweep]\nmana.hap_rate = 10 Mbps:30 Mbps:10 Mbps\nmana.cache_slots = 3, 5\n"
    cfg = parse_config(text)
    assert cfg.sweep == (("mana.hap_rate", (1e7, 2e7, 3e7)), ("mana.cache_slots", (3, 5)))
    assert parse_config(dump_config(cfg)) == cfg
