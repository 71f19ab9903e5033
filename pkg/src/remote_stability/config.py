"""JSON experiment configuration: parsing and validation.

Every key is checked against a fixed schema; unknown keys and malformed
values raise ConfigError carrying the JSON path and, where the key can be
located in the source text, its line number.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from . import channel_model as cm
from .linalg_core import ConvergenceError
from .process_model import LtiProcess, ProcessSet


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = f"line {line}: " if line else ""
        loc = f"{path}: " if path else ""
        super().__init__(f"{where}{loc}{message}")


TOP_KEYS = {"processes", "channel", "sensor_channels", "analysis", "simulation", "sweep", "output"}
PROCESS_KEYS = {"A", "C", "W", "V"}
EXPLICIT_KEYS = {"type", "kind", "states", "transition", "validate_ergodic"}
INDEPENDENT_KEYS = {"type", "factors"}
FACTOR_KEYS = {"alpha00", "alpha11"}
ANALYSIS_KEYS = {"theorem", "depth_max", "frontier_cap"}
SIMULATION_KEYS = {"policy", "period_table", "horizon", "seed", "num_seeds", "redundant",
                   "state_knowledge", "divergence_guard", "simulate_states"}
SWEEP_KEYS = {"grid", "vary_factor"}
OUTPUT_KEYS = {"dir", "formats"}


@dataclass
class ChannelSpec:
    model: cm.MarkovChannelModel
    alphas: list | None = None  # (alpha00, alpha11) per factor for independent channels


@dataclass
class ExperimentConfig:
    procs: ProcessSet
    channel: ChannelSpec | None
    sensor_channels: list = field(default_factory=list)
    analysis: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    source: str = ""


class _Ctx:
    def __init__(self, text: str):
        self.text = text

    def line_of(self, path: str) -> int | None:
        """Best-effort line of the last key in a dotted path."""
        keys = [k for k in re.split(r"[.\[\]]", path) if k and not k.isdigit()]
        pos = 0
        for k in keys:
            hit = self.text.find(f'"{k}"', pos)
            if hit < 0:
                break
            pos = hit
        return self.text.count("\n", 0, pos) + 1 if keys and pos else None

    def fail(self, msg: str, path: str):
        raise ConfigError(msg, path, self.line_of(path))


def _check_keys(ctx, obj, allowed, path, required=()):
    if not isinstance(obj, dict):
        ctx.fail("expected an object", path)
    for k in obj:
        if k not in allowed:
            ctx.fail(f"unknown key {k!r} (allowed: {', '.join(sorted(allowed))})",
                     f"{path}.{k}" if path else k)
    for k in required:
        if k not in obj:
            ctx.fail(f"missing required key {k!r}", path or k)


def _matrix(ctx, value, path) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        ctx.fail("expected a matrix literal (list of numeric rows)", path)
    if arr.ndim != 2 or arr.size == 0:
        ctx.fail("expected a non-empty 2-D matrix literal", path)
    if not np.all(np.isfinite(arr)):
        ctx.fail("matrix has non-finite entries", path)
    return arr


def _number(ctx, value, path, kind=float, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        ctx.fail(f"expected a number, got {value!r}", path)
    if kind is int and (not float(value).is_integer()):
        ctx.fail(f"expected an integer, got {value!r}", path)
    value = kind(value)
    if lo is not None and value < lo:
        ctx.fail(f"must be >= {lo}", path)
    if hi is not None and value > hi:
        ctx.fail(f"must be <= {hi}", path)
    return value


def parse_channel(ctx, obj, path) -> ChannelSpec:
    if not isinstance(obj, dict) or "type" not in obj:
        ctx.fail("channel needs a 'type' of 'explicit' or 'independent'", path)
    kind = obj["type"]
    try:
        if kind == "independent":
            _check_keys(ctx, obj, INDEPENDENT_KEYS, path, required=("factors",))
            facs = obj["factors"]
            if not isinstance(facs, list) or not facs:
                ctx.fail("expected a non-empty list of factors", f"{path}.factors")
            alphas = []
            for i, f in enumerate(facs):
                fp = f"{path}.factors[{i}]"
                _check_keys(ctx, f, FACTOR_KEYS, fp, required=("alpha00", "alpha11"))
                alphas.append((_number(ctx, f["alpha00"], f"{fp}.alpha00", lo=0, hi=1),
                               _number(ctx, f["alpha11"], f"{fp}.alpha11", lo=0, hi=1)))
            model = cm.compose_independent([cm.factor_from_alphas(*a) for a in alphas])
            return ChannelSpec(model, alphas)
        if kind == "explicit":
            _check_keys(ctx, obj, EXPLICIT_KEYS, path, required=("states", "transition"))
            labels = _matrix(ctx, obj["states"], f"{path}.states")
            trans = _matrix(ctx, obj["transition"], f"{path}.transition")
            ck = obj.get("kind", cm.BINARY)
            validate = obj.get("validate_ergodic", True)
            if not isinstance(validate, bool):
                ctx.fail("expected true/false", f"{path}.validate_ergodic")
            return ChannelSpec(cm.MarkovChannelModel(trans, labels, ck, validate))
    except cm.ChannelModelError as exc:
        ctx.fail(str(exc), path)
    ctx.fail(f"unknown channel type {kind!r}", f"{path}.type")


def parse(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    ctx = _Ctx(text)
    _check_keys(ctx, raw, TOP_KEYS, "", required=("processes",))

    procs = raw["processes"]
    if not isinstance(procs, list) or not procs:
        ctx.fail("expected a non-empty list of processes", "processes")
    parsed = []
    for i, p in enumerate(procs):
        pp = f"processes[{i}]"
        _check_keys(ctx, p, PROCESS_KEYS, pp, required=tuple(sorted(PROCESS_KEYS)))
        mats = {k: _matrix(ctx, p[k], f"{pp}.{k}") for k in ("A", "C", "W", "V")}
        try:
            parsed.append(LtiProcess(mats["A"], mats["C"], mats["W"], mats["V"]))
        except (ValueError, ConvergenceError) as exc:
            ctx.fail(str(exc), pp)
    cfg = ExperimentConfig(ProcessSet(parsed), None, source=source)

    if "channel" in raw:
        cfg.channel = parse_channel(ctx, raw["channel"], "channel")
    if "sensor_channels" in raw:
        sc = raw["sensor_channels"]
        if not isinstance(sc, list):
            ctx.fail("expected a list of channels", "sensor_channels")
        cfg.sensor_channels = [parse_channel(ctx, c, f"sensor_channels[{i}]")
                               for i, c in enumerate(sc)]

    an = raw.get("analysis", {})
    _check_keys(ctx, an, ANALYSIS_KEYS, "analysis")
    cfg.analysis = {
        "theorem": _number(ctx, an.get("theorem", 1), "analysis.theorem", int, 1, 5),
        "depth_max": _number(ctx, an.get("depth_max", 6), "analysis.depth_max", int, 1),
        "frontier_cap": _number(ctx, an.get("frontier_cap", 20000), "analysis.frontier_cap", int, 1),
    }

    sim = raw.get("simulation", {})
    _check_keys(ctx, sim, SIMULATION_KEYS, "simulation")
    out = dict(sim)
    if "horizon" in sim:
        out["horizon"] = _number(ctx, sim["horizon"], "simulation.horizon", int, 1)
    if "seed" in sim:
        out["seed"] = _number(ctx, sim["seed"], "simulation.seed", int, 0)
    out["num_seeds"] = _number(ctx, sim.get("num_seeds", 1), "simulation.num_seeds", int, 1)
    out["divergence_guard"] = _number(ctx, sim.get("divergence_guard", 10000),
                                      "simulation.divergence_guard", int, 1)
    if sim.get("state_knowledge", "previous") not in ("previous", "current"):
        ctx.fail("must be 'previous' or 'current'", "simulation.state_knowledge")
    for flag in ("redundant", "simulate_states"):
        if not isinstance(sim.get(flag, False), bool):
            ctx.fail("expected true/false", f"simulation.{flag}")
    pt = sim.get("period_table", "auto")
    if pt != "auto":
        if not isinstance(pt, list) or not pt or not all(isinstance(r, list) for r in pt):
            ctx.fail("expected 'auto' or a list of selection vectors", "simulation.period_table")
    cfg.simulation = out

    sw = raw.get("sweep", {})
    _check_keys(ctx, sw, SWEEP_KEYS, "sweep")
    cfg.sweep = dict(sw)
    outp = raw.get("output", {})
    _check_keys(ctx, outp, OUTPUT_KEYS, "output")
    cfg.output = dict(outp)

    th = cfg.analysis["theorem"]
    if th == 5:
        if len(cfg.sensor_channels) != len(cfg.procs):
            ctx.fail(f"theorem 5 needs one channel per process ({len(cfg.procs)})",
                     "sensor_channels")
    elif cfg.channel is None:
        ctx.fail("a 'channel' declaration is required", "channel")
    elif th in (1, 2, 4) and cfg.channel.model.kind != cm.BINARY:
        ctx.fail(f"theorem {th} needs a binary channel", "channel")
    return cfg


def load(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse(text, str(path))
