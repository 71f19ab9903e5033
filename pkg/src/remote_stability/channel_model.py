"""Joint Markov channel chains and the per-policy probability matrices.

Conventions used throughout the package:

* joint channel states are indexed ``0 .. n_states-1``;
* frequencies are numbered ``1 .. num_freq`` (``0`` is reserved for
  "not scheduled" at the policy layer);
* a binary label bit equal to 1 means the frequency is *on* (delivers).

For the multi-level hidden kind, each state carries a drop probability per
frequency and the packet error matrix is ``p[i, j] * d[j, v_i]``, i.e. the
drop probability of the state the chain *arrives* in, at the frequency
chosen from the state it *left*.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .linalg_core import as_matrix

BINARY = "binary"
HIDDEN = "multilevel-hidden"

MAX_INDEPENDENT_FACTORS = 10


class ChannelModelError(ValueError):
    pass


def _period(adj: np.ndarray) -> int:
    """gcd of cycle lengths of a strongly connected graph, via BFS levels."""
    n = adj.shape[0]
    level = [-1] * n
    level[0] = 0
    queue = [0]
    g = 0
    for u in queue:
        for v in np.flatnonzero(adj[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = math.gcd(g, level[u] + 1 - level[v])
    return g


def _reachable(adj: np.ndarray, start: int) -> set:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(adj[u]):
            if v not in seen:
                seen.add(int(v))
                stack.append(int(v))
    return seen


def check_ergodic(trans: np.ndarray) -> None:
    """Raise ChannelModelError unless the chain is irreducible and aperiodic."""
    adj = trans > 0
    n = adj.shape[0]
    if len(_reachable(adj, 0)) != n or len(_reachable(adj.T.copy(), 0)) != n:
        raise ChannelModelError("channel chain is not irreducible")
    period = _period(adj)
    if period != 1:
        raise ChannelModelError(f"channel chain is periodic (period {period})")


@dataclass(frozen=True, eq=False)
class MarkovChannelModel:
    """A joint channel chain over ``n_states`` states and ``num_freq`` frequencies.

    ``labels`` is an ``(n_states, num_freq)`` array: on/off bits for the
    binary kind, drop probabilities for the hidden kind.
    """

    trans: np.ndarray
    labels: np.ndarray
    kind: str = BINARY
    validate_ergodic: bool = True

    def __post_init__(self):
        trans = as_matrix(self.trans, "transition matrix")
        labels = np.array(self.labels, dtype=float, ndmin=2)
        n = trans.shape[0]
        if trans.shape != (n, n):
            raise ChannelModelError("transition matrix must be square")
        if labels.shape[0] != n:
            raise ChannelModelError(
                f"{labels.shape[0]} state labels given for {n} channel states")
        if np.any(trans < 0) or np.max(np.abs(trans.sum(axis=1) - 1.0)) > 1e-12:
            raise ChannelModelError("transition matrix rows must be nonnegative and sum to 1")
        if self.kind == BINARY:
            if not np.all((labels == 0) | (labels == 1)):
                raise ChannelModelError("binary state labels must be 0/1")
        elif self.kind == HIDDEN:
            if np.any(labels < 0) or np.any(labels > 1):
                raise ChannelModelError("drop probabilities must lie in [0, 1]")
        else:
            raise ChannelModelError(f"unknown channel kind {self.kind!r}")
        if self.validate_ergodic:
            check_ergodic(trans)
        trans.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "labels", labels)

    @property
    def n_states(self) -> int:
        return self.trans.shape[0]

    @property
    def num_freq(self) -> int:
        return self.labels.shape[1]

    @property
    def drop_probs(self) -> np.ndarray:
        """Per-state, per-frequency drop probability (``1 - bit`` for binary)."""
        return 1.0 - self.labels if self.kind == BINARY else self.labels

    def on_sets(self) -> list:
        """For each frequency f (list position f-1), the states where it is on."""
        self._require(BINARY)
        return [frozenset(np.flatnonzero(self.labels[:, f]).tolist())
                for f in range(self.num_freq)]

    def all_off_states(self) -> np.ndarray:
        self._require(BINARY)
        return np.flatnonzero(self.labels.sum(axis=1) == 0)

    def selection_vectors(self):
        """All ``num_freq ** n_states`` selection vectors, lexicographic order."""
        return itertools.product(range(1, self.num_freq + 1), repeat=self.n_states)

    def _require(self, kind: str):
        if self.kind != kind:
            raise ChannelModelError(f"operation needs a {kind} channel, got {self.kind}")

    def _selection(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=int)
        if v.shape != (self.n_states,):
            raise ChannelModelError(
                f"selection vector must have {self.n_states} entries, got shape {v.shape}")
        if np.any(v < 1) or np.any(v > self.num_freq):
            raise ChannelModelError(f"selection entries must lie in 1..{self.num_freq}")
        return v - 1


def gilbert_elliott(p_stay_off: float, p_stay_on: float) -> MarkovChannelModel:
    """Single-frequency two-state chain; state 0 is off, state 1 is on."""
    trans = [[p_stay_off, 1.0 - p_stay_off], [1.0 - p_stay_on, p_stay_on]]
    return MarkovChannelModel(trans, [[0], [1]])


def error_matrix(ch: MarkovChannelModel, v) -> np.ndarray:
    """Packet error matrix: ``E[i, j] = p[i, j]`` if state j is off at ``v_i``."""
    ch._require(BINARY)
    idx = ch._selection(v)
    off = 1.0 - ch.labels[:, idx].T  # off[i, j] = state j off at v_i
    return ch.trans * off


def success_matrix(ch: MarkovChannelModel, v) -> np.ndarray:
    ch._require(BINARY)
    idx = ch._selection(v)
    return ch.trans * ch.labels[:, idx].T


def current_state_drop_matrix(ch: MarkovChannelModel, v) -> np.ndarray:
    """Diagonal 0/1 matrix marking states that are off at their own selection."""
    ch._require(BINARY)
    idx = ch._selection(v)
    return np.diag(1.0 - ch.labels[np.arange(ch.n_states), idx])


def hidden_error_matrix(ch: MarkovChannelModel, v) -> np.ndarray:
    """``E'[i, j] = p[i, j] * d[j, v_i]``; accepts binary models as d = 1 - bit."""
    idx = ch._selection(v)
    return ch.trans * ch.drop_probs[:, idx].T


def redundant_error_matrix(ch: MarkovChannelModel) -> np.ndarray:
    """Transition matrix with every column zeroed except all-off states."""
    ch._require(BINARY)
    out = np.zeros_like(ch.trans)
    off = ch.all_off_states()
    out[:, off] = ch.trans[:, off]
    return out


def best_current_selection(ch: MarkovChannelModel) -> tuple:
    """Per state, the lowest frequency that is on there (1 if none is)."""
    ch._require(BINARY)
    out = []
    for row in ch.labels:
        on = np.flatnonzero(row)
        out.append(int(on[0]) + 1 if on.size else 1)
    return tuple(out)


def compose_independent(per_channel, max_factors: int = MAX_INDEPENDENT_FACTORS,
                        validate_ergodic: bool = True) -> MarkovChannelModel:
    """Joint chain of independent two-state (off, on) frequency channels.

    States are the bit tuples in lexicographic order, so the all-off state
    comes first and the first half of the states has frequency 1 off.
    """
    factors = [as_matrix(f, "channel factor") for f in per_channel]
    if not factors:
        raise ChannelModelError("need at least one channel factor")
    if len(factors) > max_factors:
        raise ChannelModelError(
            f"{len(factors)} independent channels exceed the limit of {max_factors}")
    for f in factors:
        if f.shape != (2, 2) or np.any(f < 0) or np.max(np.abs(f.sum(axis=1) - 1)) > 1e-12:
            raise ChannelModelError("each factor must be a 2x2 row-stochastic matrix")
    trans = reduce(np.kron, factors)
    labels = np.array(list(itertools.product((0, 1), repeat=len(factors))), dtype=float)
    return MarkovChannelModel(trans, labels, validate_ergodic=validate_ergodic)


def factor_from_alphas(alpha00: float, alpha11: float) -> np.ndarray:
    return np.array([[alpha00, 1.0 - alpha00], [1.0 - alpha11, alpha11]])


def sample_transition(ch: MarkovChannelModel, current: int, rng) -> int:
    """Draw the next state by inverse CDF on row ``current``."""
    cdf = np.cumsum(ch.trans[current])
    u = rng.random()
    j = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(j, ch.n_states - 1)


def random_transition(rng, n: int, regime: str = "uniform", dominant: float = 0.9) -> np.ndarray:
    """Random row-stochastic matrix.

    ``uniform`` draws each row uniformly from the simplex. ``dominant`` gives
    every row one entry in (dominant, 1) at a random column and spreads the
    rest uniformly over the simplex.
    """
    if regime == "uniform":
        return rng.dirichlet(np.ones(n), size=n)
    if regime != "dominant":
        raise ValueError(f"unknown regime {regime!r}")
    out = np.empty((n, n))
    for i in range(n):
        big = rng.uniform(dominant, 1.0)
        rest = rng.dirichlet(np.ones(n - 1)) * (1.0 - big) if n > 1 else np.zeros(0)
        col = rng.integers(n)
        out[i] = np.insert(rest, col, big)
    return out


def binary_labels(num_freq: int) -> np.ndarray:
    """All on/off patterns of ``num_freq`` frequencies in lexicographic order."""
    return np.array(list(itertools.product((0, 1), repeat=num_freq)), dtype=float)
