import json

import pytest

from remote_stability.config import ConfigError, load, parse

BASE = {
    "processes": [{"A": [[1.1]], "C": [[1.0]], "W": [[1.0]], "V": [[1.0]]}],
    "channel": {"type": "explicit", "states": [[0], [1]], "transition": [[0.6, 0.4], [0.1, 0.9]]},
}


def text(obj):
    return json.dumps(obj, indent=2)


def test_minimal_config_parses():
    cfg = parse(text(BASE))
    assert len(cfg.procs) == 1
    assert cfg.channel.model.n_states == 2
    assert cfg.analysis == {"theorem": 1, "depth_max": 6, "frontier_cap": 20000}


def test_shipped_configs_parse(config_dir):
    files = sorted(config_dir.glob("*.json"))
    assert len(files) >= 8
    for f in files:
        load(f)


def test_unknown_key_rejected_with_line():
    obj = dict(BASE, analysis={"theorem": 1, "depthmax": 3})
    src = text(obj)
    with pytest.raises(ConfigError) as exc:
        parse(src)
    line = next(i for i, l in enumerate(src.splitlines(), 1) if '"depthmax"' in l)
    assert exc.value.line == line
    assert "depthmax" in str(exc.value) and f"line {line}" in str(exc.value)


def test_invalid_json_reports_line():
    src = '{\n  "processes": [\n    {"A": [[1.0]],, }\n  ]\n}'
    with pytest.raises(ConfigError) as exc:
        parse(src)
    assert exc.value.line == 3


@pytest.mark.parametrize("mutate, needle", [
    (lambda o: o["channel"].update(transition=[[0.5, 0.4], [0.1, 0.9]]), "sum"),
    (lambda o: o["processes"][0].update(A=[[1.0, 2.0]]), "processes[0]"),
    (lambda o: o["processes"][0].pop("W"), "'W'"),
    (lambda o: o.update(analysis={"theorem": 9}), "theorem"),
    (lambda o: o.update(analysis={"depth_max": 0}), "depth_max"),
    (lambda o: o.update(simulation={"state_knowledge": "later"}), "state_knowledge"),
    (lambda o: o.update(simulation={"horizon": 1.5}), "horizon"),
    (lambda o: o.update(simulation={"redundant": "yes"}), "redundant"),
    (lambda o: o["channel"].update(type="magic"), "magic"),
    (lambda o: o.pop("channel"), "channel"),
    (lambda o: o.update(processes=[]), "processes"),
    (lambda o: o["processes"][0].update(A=[["x"]]), "matrix"),
])
def test_invalid_configs(mutate, needle):
    obj = json.loads(text(BASE))
    mutate(obj)
    with pytest.raises(ConfigError, match=None) as exc:
        parse(text(obj))
    assert needle in str(exc.value)


def test_independent_channel():
    obj = dict(BASE, channel={"type": "independent",
                              "factors": [{"alpha00": 0.3, "alpha11": 0.9},
                                          {"alpha00": 0.6, "alpha11": 0.9}]})
    cfg = parse(text(obj))
    assert cfg.channel.alphas == [(0.3, 0.9), (0.6, 0.9)]
    assert cfg.channel.model.n_states == 4
    bad = dict(BASE, channel={"type": "independent", "factors": [{"alpha00": 1.3, "alpha11": 0.9}]})
    with pytest.raises(ConfigError):
        parse(text(bad))


def test_theorem5_needs_sensor_channels():
    obj = dict(BASE, analysis={"theorem": 5})
    with pytest.raises(ConfigError):
        parse(text(obj))
    obj["sensor_channels"] = [BASE["channel"]]
    assert len(parse(text(obj)).sensor_channels) == 1


def test_hidden_channel_needs_theorem3():
    ch = {"type": "explicit", "kind": "multilevel-hidden", "states": [[0.9], [0.2]],
          "transition": [[0.6, 0.4], [0.1, 0.9]]}
    with pytest.raises(ConfigError):
        parse(text(dict(BASE, channel=ch)))
    parse(text(dict(BASE, channel=ch, analysis={"theorem": 3})))


def test_missing_file():
    with pytest.raises(ConfigError):
        load("/nonexistent/config.json")
