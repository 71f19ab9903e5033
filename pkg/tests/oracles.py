"""Slow, obviously-correct reference implementations used by the tests."""
import itertools

import numpy as np


def rho(m):
    m = np.asarray(m, dtype=float)
    return float(np.max(np.abs(np.linalg.eigvals(m)))) if m.size else 0.0


def error_matrix_loops(trans, labels, v):
    """E[i, j] = p_ij when the frequency chosen in state i is off in state j."""
    n = trans.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if labels[j][v[i] - 1] == 0:
                out[i, j] = trans[i, j]
    return out


def brute_force_lambda(trans, labels, depth):
    """min over all selection sequences of length ``depth`` of rho(product)^(1/depth)."""
    n = trans.shape[0]
    m = len(labels[0])
    vecs = list(itertools.product(range(1, m + 1), repeat=n))
    mats = [error_matrix_loops(trans, labels, v) for v in vecs]
    best = np.inf
    for seq in itertools.product(range(len(mats)), repeat=depth):
        prod = np.eye(n)
        for k in seq:
            prod = prod @ mats[k]
        best = min(best, rho(prod) ** (1.0 / depth))
    return best


def brute_force_lambda_matrices(mats, depth):
    n = mats[0].shape[0]
    best = np.inf
    for seq in itertools.product(range(len(mats)), repeat=depth):
        prod = np.eye(n)
        for k in seq:
            prod = prod @ mats[k]
        best = min(best, rho(prod) ** (1.0 / depth))
    return best


def riccati_fixed_point(a, c, w, v, iters=20000):
    """Plain prior-covariance iteration from P = W."""
    p = np.array(w, dtype=float)
    for _ in range(iters):
        s = c @ p @ c.T + v
        k = p @ c.T @ np.linalg.inv(s)
        post = p - k @ c @ p
        p = a @ post @ a.T + w
    s = c @ p @ c.T + v
    return p - p @ c.T @ np.linalg.inv(s) @ c @ p


def cost_by_recursion(a, w, p_bar, n):
    """c(i) = trace(h^i(P_bar)) with h(X) = A X A' + W, i = 1..n."""
    out = []
    x = np.array(p_bar, dtype=float)
    for _ in range(n):
        x = a @ x @ a.T + w
        out.append(float(np.trace(x)))
    return np.array(out)


def cycle_length_pmf_ge(p_stay_off, p_stay_on, start_on, n):
    """P(T = i) for a Gilbert-Elliott channel given the state of the previous success slot."""
    trans = np.array([[p_stay_off, 1 - p_stay_off], [1 - p_stay_on, p_stay_on]])
    dist = np.array([0.0, 1.0]) if start_on else np.array([1.0, 0.0])
    out = []
    for _ in range(n):
        nxt = dist @ trans
        out.append(nxt[1])
        dist = np.array([nxt[0], 0.0])
    return np.array(out)
