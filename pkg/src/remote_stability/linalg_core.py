"""Small dense kernels: spectral radius, order tests, Riccati fixed point,
stationary distributions.

All matrices here are tiny (at most a few dozen rows), so everything is
plain numpy on ``float64`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of iterations."""


@dataclass(frozen=True)
class SpectralResult:
    radius: float
    iterations: int
    converged: bool


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.array(m, dtype=float, ndmin=2)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _as_square(m, name: str = "matrix") -> np.ndarray:
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def spectral_radius(m, tol: float = 1e-12, max_iter: int = 100_000) -> SpectralResult:
    """Largest eigenvalue modulus of a square matrix.

    Nonnegative input goes through a shifted power iteration whose
    Collatz-Wielandt bracket ``min(Bx/x) <= rho(B) <= max(Bx/x)`` gives a
    certified stopping rule. If the bracket stalls (reducible or nearly
    periodic matrices) or the input has negative entries, the radius is
    taken from a dense eigensolver instead.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = _as_square(m)
    n = a.shape[0]
    if n == 1:
        return SpectralResult(abs(float(a[0, 0])), 0, True)
    if np.any(a < 0):
        return SpectralResult(_dense_radius(a), 0, True)
    bound = float(a.sum(axis=1).max())
    if bound == 0.0:
        return SpectralResult(0.0, 0, True)

    shift = 0.5 * bound
    b = a + shift * np.eye(n)
    x = np.ones(n)
    prev_gap = np.inf
    it = 0
    while it < max_iter:
        y = b @ x
        ratios = y / x
        lo, hi = float(ratios.min()), float(ratios.max())
        it += 1
        if hi - lo <= tol * max(1.0, lo):
            return SpectralResult(max(0.0, 0.5 * (lo + hi) - shift), it, True)
        x = y / y.sum()
        if it % 64 == 0:
            gap = hi - lo
            # bracket shrinking too slowly to finish within budget
            if gap > 0.99 * prev_gap or np.any(x < 1e-280):
                break
            prev_gap = gap
    return SpectralResult(_dense_radius(a), it, True)


def _dense_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def spectral_radii(stack: np.ndarray) -> np.ndarray:
    """Spectral radii of a ``(k, n, n)`` stack, one LAPACK call per batch."""
    stack = np.asarray(stack, dtype=float)
    if stack.shape[0] == 0:
        return np.zeros(0)
    if stack.shape[-1] == 1:
        return np.abs(stack[:, 0, 0])
    return np.abs(np.linalg.eigvals(stack)).max(axis=-1)


def elementwise_leq(a, b) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b))


def filter_cycle(a, c_meas, w_cov, v_cov, p_post):
    """One predict/update pass of the covariance recursion.

    Returns ``(posterior, prior, gain)``.
    """
    prior = a @ p_post @ a.T + w_cov
    s = c_meas @ prior @ c_meas.T + v_cov
    gain = np.linalg.solve(s.T, (prior @ c_meas.T).T).T
    post = (np.eye(a.shape[0]) - gain @ c_meas) @ prior
    return 0.5 * (post + post.T), prior, gain


_BLOWUP = 1e100


def riccati_steady_state(a, c_meas, w_cov, v_cov, tol: float = 1e-10,
                         max_iter: int = 1_000_000, p0=None) -> np.ndarray:
    """Steady-state posterior covariance of the local Kalman filter.

    Iterates the filter covariance recursion from ``p0`` (default: ``W``)
    until successive iterates differ by less than ``tol`` in max-abs norm.
    Raises ConvergenceError when the recursion does not settle, which is
    what happens for undetectable (A, C) pairs.
    """
    a = _as_square(a, "A")
    c_meas = as_matrix(c_meas, "C")
    w_cov = _as_square(w_cov, "W")
    v_cov = _as_square(v_cov, "V")
    l, r = a.shape[0], c_meas.shape[0]
    if c_meas.shape[1] != l or w_cov.shape[0] != l or v_cov.shape[0] != r:
        raise ValueError("inconsistent dimensions among A, C, W, V")
    if not np.allclose(v_cov, v_cov.T) or np.linalg.eigvalsh(v_cov).min() <= 0:
        raise ValueError("V must be symmetric positive definite")
    if not np.allclose(w_cov, w_cov.T) or np.linalg.eigvalsh(w_cov).min() < -1e-12:
        raise ValueError("W must be symmetric positive semidefinite")

    p = w_cov.copy() if p0 is None else _as_square(p0, "P0").copy()
    for it in range(max_iter):
        nxt, _, _ = filter_cycle(a, c_meas, w_cov, v_cov, p)
        if np.max(np.abs(nxt)) > _BLOWUP:
            raise ConvergenceError(f"Riccati recursion diverges (iteration {it + 1}); "
                                   "(A, C) is probably not detectable")
        if np.max(np.abs(nxt - p)) < tol:
            return nxt
        p = nxt
    raise ConvergenceError(f"Riccati recursion did not converge in {max_iter} iterations")


def stationary_distribution(p, tol: float = 1e-12) -> np.ndarray:
    """Solve ``beta P = beta`` with ``sum(beta) = 1`` for a row-stochastic P."""
    p = _as_square(p, "transition matrix")
    if np.any(p < -tol) or np.max(np.abs(p.sum(axis=1) - 1.0)) > max(tol, 1e-12):
        raise ValueError("transition matrix is not row-stochastic")
    n = p.shape[0]
    lhs = np.vstack([(np.eye(n) - p).T, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    beta, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    beta = np.clip(beta, 0.0, None)
    return beta / beta.sum()
