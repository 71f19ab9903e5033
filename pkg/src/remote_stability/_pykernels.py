"""Pure-Python versions of the compiled kernels (same signatures, same results)."""
import numpy as np

PERSISTENT, ROUND_ROBIN, GREEDY = 0, 1, 2


def dominance_scan(cands, kept, n_kept, cap, survivors):
    k = cands.shape[0]
    n_new = 0
    i = 0
    while i < k:
        if n_kept >= cap:
            break
        x = cands[i]
        if n_kept == 0 or not np.any(np.all(kept[:n_kept] <= x, axis=1)):
            kept[n_kept] = x
            survivors[n_new] = i
            n_new += 1
            n_kept += 1
        i += 1
    return n_kept, i, n_new


def run_chunk(cdf, on, table, freq_rank, u, aoi, ctl, aoi_limit, kind,
              current_knowledge, redundant, record, state_log, nu_log, gamma_log,
              cyc_sensor, cyc_len):
    horizon = u.shape[0]
    n = aoi.shape[0]
    m = on.shape[1]
    period = table.shape[1]
    prev, served, ptr = int(ctl[0]), int(ctl[1]), int(ctl[2])
    k_sched = min(n, m)
    n_cyc = 0
    diverged = False
    aoi_l = [int(a) for a in aoi]
    limit = [int(a) for a in aoi_limit]
    cdf_rows = [np.asarray(r) for r in cdf]
    t = 0
    while t < horizon:
        row = cdf_rows[prev]
        j = int(np.searchsorted(row, u[t] * row[-1], side="right"))
        cur = min(j, cdf.shape[1] - 1)
        idx = cur if current_knowledge else prev
        nu = [0] * n
        hit = [0] * n
        if kind == PERSISTENT:
            phase = aoi_l[served] % period or period
            if redundant:
                nu[served] = -1
                hit[served] = int(on[cur].any())
            else:
                f = int(table[served, phase - 1, idx])
                nu[served] = f
                hit[served] = int(on[cur, f - 1])
        elif kind == ROUND_ROBIN:
            for r in range(k_sched):
                i = (ptr + r) % n
                nu[i] = r + 1
                hit[i] = int(on[cur, r])
            ptr = (ptr + k_sched) % n
        else:
            taken = [False] * n
            for r in range(k_sched):
                best = -1
                for i in range(n):
                    if not taken[i] and (best < 0 or aoi_l[i] > aoi_l[best]):
                        best = i
                taken[best] = True
                f = int(freq_rank[idx, r])
                nu[best] = f
                hit[best] = int(on[cur, f - 1])
        if record:
            state_log[t] = cur
            nu_log[t, :] = nu
            gamma_log[t, :] = hit
        for i in range(n):
            if hit[i]:
                cyc_sensor[n_cyc] = i
                cyc_len[n_cyc] = aoi_l[i]
                n_cyc += 1
                aoi_l[i] = 1
            else:
                aoi_l[i] += 1
        if kind == PERSISTENT and hit[served]:
            served = (served + 1) % n
        prev = cur
        t += 1
        if any(a > b for a, b in zip(aoi_l, limit)):
            diverged = True
            break
    aoi[:] = aoi_l
    ctl[0], ctl[1], ctl[2] = prev, served, ptr
    return t, n_cyc, diverged
