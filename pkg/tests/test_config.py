import json

import pytest
from hypothesis import given, strategies as st

from swarmseek.config import (
    PRESETS,
    RunConfig,
    build_events,
    build_field,
    build_sim,
    build_swarm,
    dump_config,
    parse_config,
)
from swarmseek.errors import ConfigError


def test_minimal_config_gets_defaults():
    cfg = parse_config('{"field.kind": "gaussian", "sim.mode": "free"}')
    assert cfg.field.amplitude == 1.0
    assert cfg.field.scale == 10.0
    assert cfg.swarm.random.n_robots == 5
    assert cfg.sim.rtol == 1e-8
    assert parse_config('{"field": {"kind": "gaussian"}, "sim": {"mode": "free"}}') == cfg
    assert parse_config("") == RunConfig()


def test_constraint_names_rule():
    with pytest.raises(ConfigError, match=r"u_r > 0"):
        parse_config('{"sim.u_r": -1}')
    with pytest.raises(ConfigError, match=r"field.amplitude"):
        parse_config('{"field": {"amplitude": 0}}')


def test_unknown_key_path():
    with pytest.raises(ConfigError, match=r"unknown key: swarm.random.count"):
        parse_config('{"swarm": {"random": {"count": 3}}}')
    with pytest.raises(ConfigError, match=r"unknown key: bogus"):
        parse_config('{"bogus": 1}')


def test_syntax_error_position():
    with pytest.raises(ConfigError, match=r"line 3, column 13"):
        parse_config('{\n  "sim": {\n    "mode": ,\n  }\n}')



@pytest.mark.parametrize(
    "text",
    [
        '{"sim.mode": "unicycle", "field.source": [0, 0, 0]}',
        '{"swarm.positions": [[0, 0], [1, 0]], "field.source": [0, 0, 0]}',
        '{"swarm.headings": [0.0]}',
        '{"harness.events": [{"t": 1, "action": "remove"}]}',
        '{"harness.events": [{"t": 1e9, "action": "remove", "index": 0}]}',
        '{"harness.sweep.k_gamma": []}',
        '{"harness.preset": "chaos"}',
        '{"sim.seed": -1}',
        '{"swarm.random.radius_range": [2, 1]}',
    ],
)
def test_rejections(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_round_trip_defaults_and_presets():
    for text in ["{}", *[json.dumps({"harness": {"preset": p}}) for p in PRESETS]]:
        cfg = parse_config(text)
        assert parse_config(dump_config(cfg)) == cfg
        assert dump_config(parse_config(dump_config(cfg))) == dump_config(cfg)


@given(
    st.floats(0.1, 10), st.floats(0.1, 50), st.integers(1, 12), st.sampled_from(["free", "unicycle"]),
    st.lists(st.floats(0.1, 20), min_size=1, max_size=4), st.integers(0, 2**63),
)
def test_round_trip_property(amp, scale, n, mode, gains, seed):
    cfg = parse_config(json.dumps({
        "field": {"amplitude": amp, "scale": scale},
        "swarm": {"random": {"n_robots": n}},
        "sim": {"mode": mode, "seed": seed},
        "harness": {"sweep": {"k_gamma": gains}},
    }))
    assert parse_config(dump_config(cfg)) == cfg


def test_preset_values_yield_to_file():
    cfg = parse_config('{"harness.preset": "resilience", "field.amplitude": 7}')
    assert cfg.field.amplitude == 7
    assert cfg.sim.t_end == 500
    assert [e.action for e in cfg.harness.events] == ["remove"]
    assert parse_config('{"harness": {"preset": "kgamma_sweep"}}').sim.mode == "unicycle"


def test_builders():
    cfg = parse_config('{"sim.mode": "unicycle", "sim.k_gamma": 3, "ascent.omega_d_mode": "measured"}')
    f = build_field(cfg)
    sim = build_sim(cfg)
    assert (f.kind, f.scale, sim.k_gamma, sim.omega_d_mode) == ("gaussian", 10.0, 3.0, "measured")
    assert build_sim(cfg, 10).k_gamma == 10.0
    s = build_swarm(cfg, 2)
    assert s.headings is not None and s.n_robots == 5
    explicit = parse_config('{"swarm.positions": [[0, 0], [1, 0], [0, 1]]}')
    assert build_swarm(explicit).positions.shape == (3, 2)
    ev = build_events(parse_config('{"harness.events": [{"t": 2, "action": "add", "position": [1, 2]}]}'))
    assert ev[0].position == (1.0, 2.0)
    quad = parse_config('{"field": {"kind": "quadratic", "curvature": [[2, 0], [0, 1]], "operating_radius": 5}}')
    assert build_field(quad).curvature[0, 0] == 2.0
    nd = build_swarm(parse_config('{"harness.preset": "near_degenerate"}'))
    assert nd.n_robots == 5


def test_non_object_and_duplicate_keys():
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config('{"sim": {"mode": "free"}, "sim.mode": "unicycle"}')
