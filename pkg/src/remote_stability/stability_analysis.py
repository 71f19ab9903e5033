"""Stability certificates and estimation-cycle analytics.

The central quantity is

    lambda_L = min over selection sequences of rho(E(v_1) ... E(v_L)) ** (1/L)

and its infimum over L. ``lambda_search`` computes lambda_L depth by depth
on a frontier of partial products. A product that is entrywise >= another
one can never be the unique best continuation (the spectral radius of
nonnegative matrices is monotone), so dominated products are discarded.
When the surviving frontier outgrows ``frontier_cap`` it is truncated and
the affected depths become upper bounds.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import channel_model as cm
from ._backend import kernels
from .linalg_core import spectral_radii, spectral_radius, stationary_distribution
from .process_model import LtiProcess, ProcessSet, log_cost_table

DEFAULT_DEPTH = 6
DEFAULT_FRONTIER_CAP = 20_000
MAX_CANDIDATES = 20_000_000
ZERO_COLUMN_TOL = 1e-9


class Verdict(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    UNDECIDED = "undecided-at-depth"


class Builder(str, Enum):
    ERROR = "E"
    CURRENT = "VM"
    HIDDEN = "E'"


@dataclass(frozen=True)
class DepthResult:
    depth: int
    value: float
    argmin: tuple
    frontier_size: int
    exact: bool


@dataclass
class LambdaEstimate:
    per_depth: list = field(default_factory=list)
    depth_max: int = 0
    stopped_early: bool = False

    @property
    def lambda_min(self) -> float:
        return min(d.value for d in self.per_depth)

    @property
    def best(self) -> DepthResult:
        return min(self.per_depth, key=lambda d: (d.value, d.depth))

    @property
    def exact(self) -> bool:
        return all(d.exact for d in self.per_depth)

    @property
    def pruning_stats(self) -> list:
        return [d.frontier_size for d in self.per_depth]

    def values(self) -> list:
        return [d.value for d in self.per_depth]


@dataclass
class StabilityReport:
    theorem: int
    rho_max_sq: float
    lam: float
    verdict: Verdict
    lambda_estimate: LambdaEstimate | None = None
    lower_bound: float | None = None
    note: str = ""

    @property
    def product(self) -> float:
        return self.rho_max_sq * self.lam

    def to_dict(self) -> dict:
        out = {
            "theorem": self.theorem,
            "rho_max_sq": self.rho_max_sq,
            "lambda": self.lam,
            "product": self.product,
            "verdict": self.verdict.value,
            "lambda_lower_bound": self.lower_bound,
            "note": self.note,
        }
        if self.lambda_estimate is not None:
            est = self.lambda_estimate
            out["per_depth"] = [
                {"L": d.depth, "lambda_L": d.value, "exact": d.exact,
                 "frontier_size": d.frontier_size, "argmin": [list(v) for v in d.argmin]}
                for d in est.per_depth
            ]
        return out


# ---------------------------------------------------------------- factor sets

def factor_set(ch: cm.MarkovChannelModel, builder=Builder.ERROR):
    """All one-step matrices of a builder, in lexicographic selection order.

    Returns ``(stack, selections)`` where ``stack[k]`` belongs to
    ``selections[k]`` (a tuple of 1-based frequencies, one per state).
    """
    builder = Builder(builder)
    n, m = ch.n_states, ch.num_freq
    if builder in (Builder.ERROR, Builder.CURRENT) and ch.kind != cm.BINARY:
        raise cm.ChannelModelError(f"builder {builder.value} needs a binary channel")
    if builder is Builder.ERROR:
        # options[f][i] = row i of E when state i selects frequency f + 1
        options = np.stack([ch.trans * (1.0 - ch.labels[:, f])[None, :] for f in range(m)])
    elif builder is Builder.HIDDEN:
        options = np.stack([ch.trans * ch.drop_probs[:, f][None, :] for f in range(m)])
    else:
        options = np.stack([ch.trans * (1.0 - ch.labels[:, f])[:, None] for f in range(m)])
    selections = list(itertools.product(range(m), repeat=n))
    idx = np.array(selections, dtype=np.intp)
    stack = options[idx, np.arange(n)[None, :], :]
    return stack, [tuple(f + 1 for f in s) for s in selections]


# ---------------------------------------------------------------- lambda search

def _prune(cands: np.ndarray, sums: np.ndarray, cap: int, nonneg: bool):
    """Indices of the non-dominated candidates (ascending index order) and a
    truncation flag."""
    k = cands.shape[0]
    order = np.lexsort((np.arange(k), sums))
    if not nonneg:
        keep = np.sort(order[:cap])
        return keep, k > cap
    n2 = cands.shape[1] * cands.shape[2]
    flat = np.ascontiguousarray(cands.reshape(k, n2)[order])
    kept = np.empty((cap, n2))
    survivors = np.empty(min(k, cap), dtype=np.int64)
    n_kept, scanned, n_new = kernels.dominance_scan(flat, kept, 0, cap, survivors)
    keep = np.sort(order[survivors[:n_new]])
    return keep, scanned < k


def lambda_search_matrices(factors, depth_max: int = DEFAULT_DEPTH,
                           frontier_cap: int = DEFAULT_FRONTIER_CAP, labels=None,
                           stop_below: float | None = None, prune: bool = True) -> LambdaEstimate:
    """Minimal L-th-root spectral radius of length-L products from a finite set.

    ``labels[k]`` names factor k in the reported argmin sequences (defaults
    to the factor index). With ``stop_below`` the search returns as soon as
    some depth reaches a value below it.
    """
    factors = np.asarray(factors, dtype=float)
    if factors.ndim != 3 or factors.shape[1] != factors.shape[2] or factors.shape[0] == 0:
        raise ValueError("factors must be a non-empty (k, n, n) stack")
    if depth_max < 1:
        raise ValueError("depth_max must be >= 1")
    if frontier_cap < 1:
        raise ValueError("frontier_cap must be >= 1")
    labels = list(range(len(factors))) if labels is None else list(labels)
    nonneg = prune and bool(np.all(factors >= 0))
    nf = factors.shape[0]
    row_sums = factors.sum(axis=2)  # (F, n)

    est = LambdaEstimate(depth_max=depth_max)
    exact = True
    frontier = None
    parents = []  # per depth: (parent index, factor index) of each frontier entry
    for depth in range(1, depth_max + 1):
        if frontier is None:
            cands = factors
            sums = factors.sum(axis=(1, 2))
            parent = np.full(nf, -1)
            fidx = np.arange(nf)
        else:
            n_par = frontier.shape[0]
            if n_par * nf > MAX_CANDIDATES:
                n_par = max(1, MAX_CANDIDATES // nf)
                exact = False
            col_sums = frontier[:n_par].sum(axis=1)  # (P, n)
            sums = (col_sums @ row_sums.T).ravel()
            cands = np.matmul(frontier[:n_par, None], factors[None]).reshape(-1, *factors.shape[1:])
            parent = np.repeat(np.arange(n_par), nf)
            fidx = np.tile(np.arange(nf), n_par)
        keep, truncated = _prune(cands, sums, frontier_cap, nonneg)
        exact = exact and not truncated
        frontier = cands[keep]
        parents.append((parent[keep], fidx[keep]))

        rhos = spectral_radii(frontier)
        best = int(np.argmin(rhos))
        value = float(max(rhos[best], 0.0)) ** (1.0 / depth)
        est.per_depth.append(DepthResult(depth, value, _trace(parents, best, labels),
                                         int(frontier.shape[0]), exact))
        if stop_below is not None and value < stop_below:
            est.stopped_early = depth < depth_max
            break
    return est


def _trace(parents, pos: int, labels) -> tuple:
    seq = []
    for par, fid in reversed(parents):
        seq.append(labels[int(fid[pos])])
        pos = int(par[pos])
    return tuple(reversed(seq))


def lambda_search(ch: cm.MarkovChannelModel, depth_max: int = DEFAULT_DEPTH,
                  frontier_cap: int = DEFAULT_FRONTIER_CAP, matrix_builder=Builder.ERROR,
                  stop_below: float | None = None) -> LambdaEstimate:
    stack, sels = factor_set(ch, matrix_builder)
    return lambda_search_matrices(stack, depth_max, frontier_cap, labels=sels,
                                  stop_below=stop_below)


# ---------------------------------------------------------------- certificates

def lambda_lower_bound(ch: cm.MarkovChannelModel) -> float:
    """A certified lower bound on lambda_inf.

    Every one-step matrix is entrywise >= ``P diag(min_f d_j,f)`` (for binary
    channels: the redundant-transmission matrix), so no selection sequence
    can beat its spectral radius.
    """
    floor = ch.trans * ch.drop_probs.min(axis=1)[None, :]
    return spectral_radius(floor).radius


def no_success_possible(ch: cm.MarkovChannelModel) -> bool:
    """True when every frequency is off in every state (lambda_inf = 1)."""
    return bool(np.all(ch.drop_probs >= 1.0))


def _verdict(rho_sq: float, est: LambdaEstimate, lower: float) -> Verdict:
    if rho_sq * est.lambda_min < 1.0:
        return Verdict.STABLE
    if rho_sq * lower >= 1.0:
        return Verdict.UNSTABLE
    return Verdict.UNDECIDED


def theorem1_verdict(procs: ProcessSet, ch: cm.MarkovChannelModel,
                     depth_max: int = DEFAULT_DEPTH,
                     frontier_cap: int = DEFAULT_FRONTIER_CAP,
                     early_stop: bool = True) -> StabilityReport:
    """Previous channel state known, one frequency per packet."""
    ch._require(cm.BINARY)
    return _search_verdict(1, procs, ch, Builder.ERROR, depth_max, frontier_cap, early_stop)


def theorem3_verdict(procs: ProcessSet, ch: cm.MarkovChannelModel,
                     depth_max: int = DEFAULT_DEPTH,
                     frontier_cap: int = DEFAULT_FRONTIER_CAP,
                     early_stop: bool = True) -> StabilityReport:
    """Multi-level hidden channel states; accepts binary channels too."""
    return _search_verdict(3, procs, ch, Builder.HIDDEN, depth_max, frontier_cap, early_stop)


def _search_verdict(theorem, procs, ch, builder, depth_max, frontier_cap, early_stop):
    rho_sq = procs.rho_max_sq
    lower = 1.0 if no_success_possible(ch) else lambda_lower_bound(ch)
    stop = (1.0 / rho_sq if rho_sq > 0 else math.inf) if early_stop else None
    est = lambda_search(ch, depth_max, frontier_cap, builder, stop_below=stop)
    verdict = _verdict(rho_sq, est, lower)
    note = ""
    if verdict is Verdict.UNDECIDED:
        note = (f"rho_max^2 * lambda_min = {rho_sq * est.lambda_min:.6g} >= 1 at depth "
                f"{len(est.per_depth)}; certified lower bound gives {rho_sq * lower:.6g}")
    return StabilityReport(theorem, rho_sq, est.lambda_min, verdict, est, lower, note)


def theorem2_lambda(ch: cm.MarkovChannelModel) -> float:
    """lambda' when the current channel state is known before transmitting.

    The minimising selection picks, in each state, a frequency that is on
    there; the product search then collapses to depth 1.
    """
    ch._require(cm.BINARY)
    v_star = cm.best_current_selection(ch)
    return spectral_radius(cm.current_state_drop_matrix(ch, v_star) @ ch.trans).radius


def theorem2_verdict(procs: ProcessSet, ch: cm.MarkovChannelModel) -> StabilityReport:
    lam = theorem2_lambda(ch)
    rho_sq = procs.rho_max_sq
    verdict = Verdict.STABLE if rho_sq * lam < 1.0 else Verdict.UNSTABLE
    return StabilityReport(2, rho_sq, lam, verdict, lower_bound=lam)


def theorem4_verdict(procs: ProcessSet, ch: cm.MarkovChannelModel) -> StabilityReport:
    """Redundant transmissions over all frequencies: exact, no search."""
    lam = spectral_radius(cm.redundant_error_matrix(ch)).radius
    rho_sq = procs.rho_max_sq
    verdict = Verdict.STABLE if rho_sq * lam < 1.0 else Verdict.UNSTABLE
    return StabilityReport(4, rho_sq, lam, verdict, lower_bound=lam)


@dataclass
class MultiSensorResult:
    necessary_ok: bool
    sufficient_ok: bool
    per_sensor: list
    rho_sq: list

    @property
    def verdict(self) -> Verdict:
        if self.sufficient_ok:
            return Verdict.STABLE
        if not self.necessary_ok:
            return Verdict.UNSTABLE
        return Verdict.UNDECIDED


def theorem5_verdicts(procs: ProcessSet, per_sensor_channels,
                      depth_max: int = DEFAULT_DEPTH,
                      frontier_cap: int = DEFAULT_FRONTIER_CAP) -> MultiSensorResult:
    """Gateway-free sensors, each with its own channel chain.

    ``per_sensor_channels`` follows the caller's original process order;
    ``per_sensor`` in the result follows the sorted order of ``procs``.
    Both flags use the depth-limited lambda estimates.
    """
    channels = list(per_sensor_channels)
    if len(channels) != len(procs):
        raise ValueError(f"{len(channels)} channel models for {len(procs)} sensors")
    ests = [lambda_search(channels[k], depth_max, frontier_cap) for k in procs.original_index]
    lams = [e.lambda_min for e in ests]
    rho_sq = [p.rho_sq for p in procs]
    necessary = max(r * lam for r, lam in zip(rho_sq, lams)) < 1.0
    sufficient = procs.rho_max_sq * max(lams) < 1.0
    return MultiSensorResult(necessary, sufficient, ests, rho_sq)


def independent_channel_lambda(alpha00s) -> float:
    """Independent-channel sufficient-condition index: the smallest stay-off probability."""
    return float(min(alpha00s))


# ---------------------------------------------------------------- cycle analytics

class PeriodicSelection:
    """Selection vector as a periodic function of the AoI.

    ``table[k]`` is used at AoI phi when ``phi mod L == k + 1``, with the
    remainder-zero case mapped to L.
    """

    def __init__(self, table):
        table = [tuple(int(f) for f in v) for v in table]
        if not table:
            raise ValueError("selection table must not be empty")
        self.table = table

    @property
    def period(self) -> int:
        return len(self.table)

    def __call__(self, phi: int) -> tuple:
        return self.table[(phi - 1) % len(self.table)]


@dataclass
class CycleAnalytics:
    g_matrix: np.ndarray
    beta: np.ndarray | None
    precycle_states: np.ndarray
    expected_t: float
    expected_c: float
    analytic_j: float
    diverged: bool
    truncation_depth: int
    tail_bound: float
    length_pmf: np.ndarray  # per start state, P(T = i), i = 1..truncation_depth

    @property
    def m1_count(self) -> int:
        return int(self.precycle_states.size)

    def cycle_length_pmf(self) -> np.ndarray:
        """Unconditional P(T = i) under the stationary pre-cycle distribution."""
        beta = np.zeros(self.g_matrix.shape[0])
        if self.beta is not None:
            beta[self.precycle_states] = self.beta
        return beta @ self.length_pmf


def cycle_analytics(proc: LtiProcess, ch: cm.MarkovChannelModel, policy,
                    truncation_tol: float = 1e-10, max_depth: int = 200_000,
                    stall_blocks: int = 200) -> CycleAnalytics:
    """Cycle-length law and the long-run cost of one persistently served sensor.

    ``policy`` is a PeriodicSelection (or a plain selection table). The
    series for E[T] and E[C] are summed period block by period block; the
    summation stops when the geometric extrapolation of the remaining
    terms falls below ``truncation_tol`` relative to the partial sum, and
    divergence is declared when the terms keep growing for ``stall_blocks``
    consecutive blocks, overflow, or ``max_depth`` is hit.
    """
    if not isinstance(policy, PeriodicSelection):
        policy = PeriodicSelection(policy)
    n = ch.n_states
    period = policy.period
    errs = [cm.error_matrix(ch, v) for v in policy.table]
    succ = [cm.success_matrix(ch, v) for v in policy.table]
    log_g = np.logaddexp.accumulate(log_cost_table(proc, max_depth + period))

    xi = np.eye(n)
    g_mat = np.zeros((n, n))
    pmf_rows = []
    sum_t = np.zeros(n)
    sum_c = np.zeros(n)
    prev_block_c = None
    growing = 0
    diverged = False
    tail = math.inf
    depth = 0
    while True:
        block_c = np.zeros(n)
        for k in range(period):
            depth += 1
            xt = xi @ succ[k]
            xi = xi @ errs[k]
            mass = xt.sum(axis=1)
            g_mat += xt
            pmf_rows.append(mass)
            sum_t += depth * mass
            with np.errstate(divide="ignore", over="ignore"):
                block_c += np.exp(log_g[depth - 1] + np.log(mass))
        sum_c += block_c
        remaining = xi.sum(axis=1)
        if not np.all(np.isfinite(sum_c)):
            diverged = True
            break
        total_c = float(np.max(sum_c))
        peak = float(np.max(block_c))
        if remaining.max() == 0.0:
            tail = 0.0
            break
        if prev_block_c is not None and peak > 0:
            ratio = peak / prev_block_c if prev_block_c > 0 else math.inf
            if ratio < 1.0:
                growing = 0
                tail = peak * ratio / (1.0 - ratio)
                # a cycle-cost tail that is tiny also bounds the (smaller) T tail
                if tail <= truncation_tol * max(total_c, 1e-300):
                    break
            else:
                growing += 1
                if growing >= stall_blocks:
                    diverged = True
                    break
        elif peak == 0.0:
            growing += 1
            if growing >= stall_blocks:
                diverged = True
                break
        prev_block_c = peak
        if depth >= max_depth:
            diverged = True
            break

    precycle = np.flatnonzero(g_mat.max(axis=0) >= ZERO_COLUMN_TOL)
    length_pmf = np.array(pmf_rows).T
    if diverged or precycle.size == 0:
        return CycleAnalytics(g_mat, None, precycle, math.inf, math.inf, math.inf, True,
                              depth, math.inf, length_pmf)
    g_sub = g_mat[np.ix_(precycle, precycle)]
    g_sub = g_sub / g_sub.sum(axis=1, keepdims=True)
    beta = stationary_distribution(g_sub, tol=1e-6)
    e_t = float(beta @ sum_t[precycle])
    e_c = float(beta @ sum_c[precycle])
    return CycleAnalytics(g_mat, beta, precycle, e_t, e_c, e_c / e_t, False, depth,
                          float(tail), length_pmf)


# ---------------------------------------------------------------- policy types

def classify_policy_type(ch: cm.MarkovChannelModel, policy) -> str:
    """'type-I' if the periodic policy eventually only uses selections with
    no chance of success, otherwise 'type-II'."""
    if not isinstance(policy, PeriodicSelection):
        if callable(policy):
            raise ValueError("policy must be periodic (a selection table)")
        policy = PeriodicSelection(policy)
    live = [bool(np.any(cm.success_matrix(ch, v) > 0)) for v in policy.table]
    return "type-II" if any(live) else "type-I"
