"""Slot-level Monte-Carlo of the multi-sensor, multi-frequency system.

Per slot ``t``: the channel moves from ``h(t-1)`` to ``h(t)``; the policy
picks frequencies from the AoI vector and ``h(t-1)`` (or ``h(t)`` when the
current state is known); a scheduled packet is delivered iff its frequency
is on in ``h(t)``. The AoI of a delivered process is 1 in the next slot,
otherwise it grows by one. The remote error trace of process n at slot t is
``c_n(AoI)``, so the cost is accumulated per estimation cycle as
``g(T)`` without sampling the noise.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel_model as cm
from ._backend import kernels
from .linalg_core import stationary_distribution
from .process_model import ProcessSet, cost_table, local_kf_step, initial_filter_state

PERSISTENT_SERIAL = "persistent-serial"
ROUND_ROBIN = "round-robin-baseline"
GREEDY = "greedy-max-aoi-baseline"
_KIND_CODE = {PERSISTENT_SERIAL: 0, ROUND_ROBIN: 1, GREEDY: 2}

CHUNK = 1 << 18


@dataclass(frozen=True)
class SchedulerPolicy:
    kind: str
    channel_rule: np.ndarray  # (n_sensors, period, n_states), 1-based frequencies

    @property
    def period(self) -> int:
        return self.channel_rule.shape[1]


def make_persistent_serial(procs: ProcessSet, ch: cm.MarkovChannelModel, period_table) -> SchedulerPolicy:
    """Serve one sensor until it succeeds, then the next, cyclically.

    ``period_table`` is a sequence of selection vectors (for instance the
    argmin sequence of a lambda search); the same table drives every sensor.
    """
    table = np.array([list(v) for v in period_table], dtype=np.int64)
    if table.size == 0:
        raise ValueError("period table must not be empty")
    if table.ndim != 2 or table.shape[1] != ch.n_states:
        raise ValueError(f"each selection vector needs {ch.n_states} entries")
    if table.min() < 1 or table.max() > ch.num_freq:
        raise ValueError(f"selections must lie in 1..{ch.num_freq}")
    rule = np.broadcast_to(table, (len(procs),) + table.shape).copy()
    return SchedulerPolicy(PERSISTENT_SERIAL, rule)


def make_baseline(kind: str, procs: ProcessSet, ch: cm.MarkovChannelModel) -> SchedulerPolicy:
    if kind not in (ROUND_ROBIN, GREEDY):
        raise ValueError(f"unknown baseline {kind!r}")
    return SchedulerPolicy(kind, np.ones((len(procs), 1, ch.n_states), dtype=np.int64))


@dataclass
class SimConfig:
    procs: ProcessSet
    channel: cm.MarkovChannelModel
    policy: SchedulerPolicy
    horizon: int
    seed: int
    redundant_mode: bool = False
    state_knowledge: str = "previous"
    divergence_guard: int = 10_000
    record: bool = True
    simulate_states: bool = False

    def validate(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.channel.kind != cm.BINARY:
            raise ValueError("simulation needs a binary channel model")
        if self.state_knowledge not in ("previous", "current"):
            raise ValueError("state_knowledge must be 'previous' or 'current'")
        if self.policy.kind not in _KIND_CODE:
            raise ValueError(f"unknown policy kind {self.policy.kind!r}")
        rule = self.policy.channel_rule
        if rule.shape[0] != len(self.procs) or rule.shape[2] != self.channel.n_states:
            raise ValueError("policy table does not match the sensors and channel states")
        if rule.min() < 1 or rule.max() > self.channel.num_freq:
            raise ValueError("policy selections out of range")
        if self.redundant_mode and self.policy.kind != PERSISTENT_SERIAL:
            raise ValueError("redundant mode is only defined for the persistent-serial policy")
        if self.simulate_states and not self.record:
            raise ValueError("state simulation needs the per-slot log")


@dataclass
class SimulationTrace:
    slots: int
    n_sensors: int
    diverged: bool
    cycle_sensor: np.ndarray
    cycle_length: np.ndarray
    cycle_cost: np.ndarray
    empirical_j_per_sensor: np.ndarray
    final_aoi: np.ndarray
    state_log: np.ndarray | None = None
    nu_log: np.ndarray | None = None
    gamma_log: np.ndarray | None = None
    sample_sq_error: np.ndarray | None = None
    initial_state: int = 0

    @property
    def empirical_j(self) -> float:
        return math.fsum(self.empirical_j_per_sensor)

    def cycles(self, sensor: int):
        """``(T_k, C_k)`` arrays of one sensor (sorted process index)."""
        sel = self.cycle_sensor == sensor
        return self.cycle_length[sel], self.cycle_cost[sel]

    @property
    def aoi(self) -> np.ndarray:
        """``(slots, n_sensors)`` AoI at each slot, rebuilt from the success log."""
        if self.gamma_log is None:
            raise ValueError("trace was run without the per-slot log")
        t = np.arange(1, self.slots + 1)[:, None]
        hit_at = np.where(self.gamma_log.astype(bool), t, 0)
        last = np.vstack([np.zeros((1, self.n_sensors), dtype=np.int64),
                          np.maximum.accumulate(hit_at, axis=0)[:-1]])
        return t - last

    def write_slot_csv(self, path):
        if self.state_log is None:
            raise ValueError("trace was run without the per-slot log")
        aoi = self.aoi
        header = ["t", "channel_state"]
        for n in range(self.n_sensors):
            header += [f"freq_{n + 1}", f"success_{n + 1}", f"aoi_{n + 1}"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t in range(self.slots):
                row = [t + 1, int(self.state_log[t])]
                for n in range(self.n_sensors):
                    row += [int(self.nu_log[t, n]), int(self.gamma_log[t, n]), int(aoi[t, n])]
                w.writerow(row)

    def write_cycle_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sensor", "k", "T_k", "C_k"])
            counts = [0] * self.n_sensors
            for s, t, c in zip(self.cycle_sensor, self.cycle_length, self.cycle_cost):
                counts[s] += 1
                w.writerow([int(s) + 1, counts[s], int(t), repr(float(c))])


def _freq_rank(ch: cm.MarkovChannelModel, current: bool) -> np.ndarray:
    on = ch.labels
    score = on if current else ch.trans @ on
    # descending success probability, lower frequency first on ties
    order = np.argsort(-score, axis=1, kind="stable")
    return np.ascontiguousarray(order + 1, dtype=np.int64)


def _draw_initial(ch: cm.MarkovChannelModel, rng) -> int:
    beta = stationary_distribution(ch.trans)
    cdf = np.cumsum(beta)
    j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(j, ch.n_states - 1)


def run(cfg: SimConfig) -> SimulationTrace:
    cfg.validate()
    ch, procs = cfg.channel, cfg.procs
    n = len(procs)
    rng = np.random.default_rng(cfg.seed)
    init = _draw_initial(ch, rng)

    # AoI beyond which a process's cost saturates counts as divergence
    g_tabs, limits = [], []
    for p in procs:
        with np.errstate(over="ignore", invalid="ignore"):
            g = np.cumsum(cost_table(p, cfg.divergence_guard))
        finite = int(np.isfinite(g).sum())
        g_tabs.append(np.concatenate([[0.0], g[:finite]]))
        limits.append(min(cfg.divergence_guard, finite))
    aoi_limit = np.array(limits, dtype=np.int64)

    cdf = np.ascontiguousarray(np.cumsum(ch.trans, axis=1))
    on = np.ascontiguousarray(ch.labels.astype(np.uint8))
    table = np.ascontiguousarray(cfg.policy.channel_rule, dtype=np.int64)
    current = cfg.state_knowledge == "current"
    rank = _freq_rank(ch, current)
    kind = _KIND_CODE[cfg.policy.kind]

    aoi = np.ones(n, dtype=np.int64)
    ctl = np.array([init, 0, 0], dtype=np.int64)
    k_sched = min(n, ch.num_freq)
    if cfg.record:
        state_log = np.zeros(cfg.horizon, dtype=np.int32)
        nu_log = np.zeros((cfg.horizon, n), dtype=np.int16)
        gamma_log = np.zeros((cfg.horizon, n), dtype=np.uint8)

    cyc_s, cyc_t = [], []
    done = 0
    diverged = False
    while done < cfg.horizon and not diverged:
        size = min(CHUNK, cfg.horizon - done)
        u = rng.random(size)
        cs = np.empty(size * k_sched, dtype=np.int64)
        ct = np.empty(size * k_sched, dtype=np.int64)
        if cfg.record:
            logs = (state_log[done:done + size], nu_log[done:done + size],
                    gamma_log[done:done + size])
        else:
            logs = (np.empty(0, np.int32), np.empty((0, n), np.int16),
                    np.empty((0, n), np.uint8))
        steps, n_cyc, div = kernels.run_chunk(
            cdf, on, table, rank, u, aoi, ctl, aoi_limit, kind, int(current),
            int(cfg.redundant_mode), int(cfg.record), *logs, cs, ct)
        cyc_s.append(cs[:n_cyc])
        cyc_t.append(ct[:n_cyc])
        done += steps
        diverged = bool(div)

    cycle_sensor = np.concatenate(cyc_s)
    cycle_length = np.concatenate(cyc_t)
    cycle_cost = np.empty(cycle_length.size)
    j_per = np.empty(n)
    for k in range(n):
        sel = cycle_sensor == k
        cycle_cost[sel] = g_tabs[k][cycle_length[sel]]
        if diverged:
            j_per[k] = math.inf
        else:
            partial = g_tabs[k][aoi[k] - 1]
            j_per[k] = (math.fsum(cycle_cost[sel]) + partial) / done

    trace = SimulationTrace(done, n, diverged, cycle_sensor, cycle_length, cycle_cost,
                            j_per, aoi.copy(), initial_state=init)
    if cfg.record:
        trace.state_log = state_log[:done]
        trace.nu_log = nu_log[:done]
        trace.gamma_log = gamma_log[:done]
        if cfg.simulate_states:
            trace.sample_sq_error = _simulate_states(procs, trace, rng)
    return trace


def _simulate_states(procs: ProcessSet, trace: SimulationTrace, rng) -> np.ndarray:
    """Drive the physical processes and filters along the recorded schedule.

    Returns the time-averaged squared remote estimation error per process,
    a noisy sample of the deterministic cost used elsewhere.
    """
    out = np.zeros(len(procs))
    for k, p in enumerate(procs):
        chol_w = np.linalg.cholesky(p.w_cov + 1e-300 * np.eye(p.dim)) if np.any(p.w_cov) else None
        chol_v = np.linalg.cholesky(p.v_cov)
        x = np.zeros(p.dim)
        local = initial_filter_state(p)
        remote = np.zeros(p.dim)
        last_local = local.x_hat
        acc = 0.0
        for t in range(trace.slots):
            w = chol_w @ rng.standard_normal(p.dim) if chol_w is not None else 0.0
            x = p.a @ x + w
            # remote prediction uses what arrived at the end of the previous slot
            remote = p.a @ (last_local if (t > 0 and trace.gamma_log[t - 1, k]) or t == 0 else remote)
            err = remote - x
            acc += float(err @ err)
            y = p.c_meas @ x + chol_v @ rng.standard_normal(p.c_meas.shape[0])
            local = local_kf_step(p, local, y)
            last_local = local.x_hat
        out[k] = acc / trace.slots
    return out


@dataclass
class EnsembleSummary:
    num_seeds: int
    mean_j: float
    stderr_j: float
    divergence_fraction: float
    per_seed_j: list = field(default_factory=list)


def run_ensemble(cfg: SimConfig, num_seeds: int) -> EnsembleSummary:
    """Independent runs with seeds ``seed, seed+1, ...``.

    Mean and standard error are taken over the runs that did not diverge.
    """
    if num_seeds < 1:
        raise ValueError("num_seeds must be >= 1")
    values = []
    diverged = 0
    for i in range(num_seeds):
        tr = run(replace(cfg, seed=cfg.seed + i, record=False, simulate_states=False))
        values.append(tr.empirical_j)
        diverged += tr.diverged
    finite = [v for v in values if math.isfinite(v)]
    if finite:
        mean = math.fsum(finite) / len(finite)
        var = math.fsum((v - mean) ** 2 for v in finite) / max(len(finite) - 1, 1)
        stderr = math.sqrt(var / len(finite)) if len(finite) > 1 else 0.0
    else:
        mean, stderr = math.inf, math.nan
    return EnsembleSummary(num_seeds, mean, stderr, diverged / num_seeds, values)
