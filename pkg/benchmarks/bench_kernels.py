"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Both backends are loaded
explicitly and swapped into the modules that use them, so one process
times both on identical inputs and checks that the results agree.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from remote_stability import _pykernels
from remote_stability import channel_model as cm
from remote_stability import simulator as sim
from remote_stability import stability_analysis as sa
from remote_stability.process_model import LtiProcess, ProcessSet

try:
    from remote_stability import _kernels
except ImportError:
    _kernels = None


def use(backend):
    sa.kernels = backend
    sim.kernels = backend


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def search_case(seed, depth):
    rng = np.random.default_rng(seed)
    labels = cm.binary_labels(2)
    chans = [cm.MarkovChannelModel(cm.random_transition(rng, 4), labels, validate_ergodic=False)
             for _ in range(5)]
    return lambda: [tuple(sa.lambda_search(c, depth).values()) for c in chans]


def sim_case(horizon):
    ch = cm.compose_independent([cm.factor_from_alphas(0.3, 0.9), cm.factor_from_alphas(0.6, 0.9)])
    procs = ProcessSet([LtiProcess.scalar(1.2), LtiProcess.scalar(1.0), LtiProcess.scalar(0.9)])
    pol = sim.make_persistent_serial(procs, ch, [(1, 2, 1, 2)])
    cfg = sim.SimConfig(procs, ch, pol, horizon, seed=0, record=False)
    return lambda: sim.run(cfg).empirical_j


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=4)
    ap.add_argument("--horizon", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    cases = [
        (f"lambda search, 5 models, depth {args.depth}", search_case(0, args.depth)),
        (f"simulation, 3 sensors, {args.horizon} slots", sim_case(args.horizon)),
    ]
    print(f"{'case':<42} {'compiled':>10} {'python':>10} {'speedup':>8}")
    for name, fn in cases:
        use(_kernels)
        t_fast, r_fast = timed(fn, args.repeat)
        use(_pykernels)
        t_slow, r_slow = timed(fn, 1)
        if r_fast != r_slow:
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<42} {t_fast:>9.3f}s {t_slow:>9.3f}s {t_slow / t_fast:>7.1f}x")
    use(_kernels)


if __name__ == "__main__":
    main()
