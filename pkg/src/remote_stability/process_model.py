"""LTI processes, their steady-state local filters and AoI-indexed costs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg_core import (
    _as_square,
    as_matrix,
    filter_cycle,
    riccati_steady_state,
    spectral_radius,
)


@dataclass(frozen=True, eq=False)
class LtiProcess:
    """``x(t+1) = A x(t) + w(t)``, ``y(t) = C x(t) + v(t)`` with Gaussian noise.

    The steady-state posterior covariance of the sensor's Kalman filter is
    computed on construction and cached as ``p_bar``.
    """

    a: np.ndarray
    c_meas: np.ndarray
    w_cov: np.ndarray
    v_cov: np.ndarray
    riccati_tol: float = 1e-10
    riccati_max_iter: int = 1_000_000
    rho: float = field(init=False)
    p_bar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = _as_square(self.a, "A")
        c = as_matrix(self.c_meas, "C")
        w = _as_square(self.w_cov, "W")
        v = _as_square(self.v_cov, "V")
        for arr in (a, c, w, v):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c_meas", c)
        object.__setattr__(self, "w_cov", w)
        object.__setattr__(self, "v_cov", v)
        object.__setattr__(self, "rho", spectral_radius(a).radius)
        p_bar = riccati_steady_state(a, c, w, v, tol=self.riccati_tol,
                                     max_iter=self.riccati_max_iter)
        p_bar.setflags(write=False)
        object.__setattr__(self, "p_bar", p_bar)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def rho_sq(self) -> float:
        return self.rho ** 2

    @classmethod
    def scalar(cls, a: float, c: float = 1.0, w: float = 1.0, v: float = 1.0, **kw):
        return cls([[a]], [[c]], [[w]], [[v]], **kw)


class ProcessSet:
    """Processes ordered by decreasing spectral radius.

    ``original_index[k]`` is the position, in the caller's input order, of
    the k-th process after sorting. The sort is stable.
    """

    def __init__(self, processes):
        processes = list(processes)
        if not processes:
            raise ValueError("a ProcessSet needs at least one process")
        order = sorted(range(len(processes)), key=lambda i: -processes[i].rho)
        self.processes = tuple(processes[i] for i in order)
        self.original_index = tuple(order)

    def __len__(self):
        return len(self.processes)

    def __iter__(self):
        return iter(self.processes)

    def __getitem__(self, k):
        return self.processes[k]

    @property
    def rho_max(self) -> float:
        return self.processes[0].rho

    @property
    def rho_max_sq(self) -> float:
        return self.processes[0].rho ** 2


@dataclass(frozen=True)
class LocalFilterState:
    x_hat: np.ndarray
    p_bar: np.ndarray


def initial_filter_state(proc: LtiProcess) -> LocalFilterState:
    return LocalFilterState(np.zeros(proc.dim), proc.p_bar)


def local_kf_step(proc: LtiProcess, state: LocalFilterState, y) -> LocalFilterState:
    """Advance the sensor's steady-state Kalman filter by one measurement."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (proc.c_meas.shape[0],) or state.x_hat.shape != (proc.dim,):
        raise ValueError("dimension mismatch between filter state, measurement and process")
    post, prior, gain = filter_cycle(proc.a, proc.c_meas, proc.w_cov, proc.v_cov, state.p_bar)
    x_prior = proc.a @ state.x_hat
    x_post = x_prior + gain @ (y - proc.c_meas @ x_prior)
    return LocalFilterState(x_post, post)


def zeta_apply(proc: LtiProcess, x, k: int) -> np.ndarray:
    """k-fold open-loop covariance propagation ``X -> A X A' + W``."""
    if k < 1:
        raise ValueError("k must be >= 1; use X itself for k = 0")
    x = np.array(x, dtype=float, ndmin=2)
    a, w = proc.a, proc.w_cov
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(k):
            x = a @ x @ a.T + w
    return x


def cost_table(proc: LtiProcess, n: int, p_bar=None) -> np.ndarray:
    """``[c(1), ..., c(n)]`` with ``c(i) = Tr(zeta^i(P_bar))``.

    Values that overflow double precision are stored as ``inf``; every
    later entry is ``inf`` as well.
    """
    x = proc.p_bar if p_bar is None else np.array(p_bar, dtype=float, ndmin=2)
    a, w = proc.a, proc.w_cov
    out = np.empty(n)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            x = a @ x @ a.T + w
            tr = float(np.trace(x))
            if not math.isfinite(tr):
                out[i:] = math.inf
                break
            out[i] = tr
    return out


def log_cost_table(proc: LtiProcess, n: int, p_bar=None) -> np.ndarray:
    """``log c(1), ..., log c(n)`` without overflow (scaled recursion)."""
    y = np.array(proc.p_bar if p_bar is None else p_bar, dtype=float, ndmin=2)
    a, w = proc.a, proc.w_cov
    log_scale = 0.0
    out = np.empty(n)
    for i in range(n):
        y = a @ y @ a.T + w * math.exp(-log_scale)
        tr = float(np.trace(y))
        if tr <= 0.0:
            out[i:] = -math.inf
            break
        log_scale += math.log(tr)
        y = y / tr
        out[i] = log_scale
    return out


def cycle_cost_table(proc: LtiProcess, n: int, p_bar=None) -> np.ndarray:
    """``[g(1), ..., g(n)]``, the cumulative cycle costs."""
    with np.errstate(over="ignore", invalid="ignore"):
        return np.cumsum(cost_table(proc, n, p_bar))


def cost_c(proc: LtiProcess, p_bar=None, i: int = 1) -> float:
    """Trace of the remote error covariance at AoI ``i`` (``inf`` once saturated)."""
    if i < 1:
        raise ValueError("AoI index must be >= 1")
    return float(cost_table(proc, i, p_bar)[-1])


def cost_g(proc: LtiProcess, p_bar=None, t: int = 1) -> float:
    """Accumulated cost ``c(1) + ... + c(t)`` of one estimation cycle of length t."""
    if t < 1:
        raise ValueError("cycle length must be >= 1")
    return float(cycle_cost_table(proc, t, p_bar)[-1])


def is_saturated(value: float) -> bool:
    return not math.isfinite(value)
