"""Command line front end.

Subcommands: analyze, lambda-curve, sweep-region, compare-knowledge,
simulate. Every output file is staged in memory (or a private temporary
directory) and only moved into ``--out-dir`` once the whole command has
succeeded, so a bad config never leaves partial output behind.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import shutil
import sys
import tempfile

import numpy as np

from . import channel_model as cm
from . import simulator as sim
from . import stability_analysis as sa
from .config import ConfigError, ExperimentConfig, load

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CODES = {sa.Verdict.STABLE: 0, sa.Verdict.UNSTABLE: 2, sa.Verdict.UNDECIDED: 3}

FIG2_SET_SIZE = 8
FIG2_DIM = 4
FIG2_DENSITY = 0.5


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- output helpers

def fmt_value(x) -> str:
    """CSV cell text; floats use the shortest exact round-trip form."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_value(v) for v in r])
    return buf.getvalue()


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def table_text(header, rows, fmt) -> str:
    if fmt == "json":
        return json_text([dict(zip(header, r)) for r in rows])
    return csv_text(header, rows)


def encode_argmin(seq) -> str:
    """Selection sequence as ``1 2;2 1`` (vectors separated by ';')."""
    return ";".join(" ".join(str(f) for f in v) for v in seq)


def _default_mode() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return 0o666 & ~mask


_FILE_MODE = _default_mode()


class Staging:
    """Collects output files and publishes them atomically on commit."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.texts: dict[str, str] = {}
        self._tmp: str | None = None

    def add_text(self, name: str, text: str):
        self.texts[name] = text

    def path(self, name: str) -> str:
        """Scratch path for writers that need a real file."""
        if self._tmp is None:
            os.makedirs(self.out_dir, exist_ok=True)
            self._tmp = tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir)
        return os.path.join(self._tmp, name)

    def commit(self) -> list:
        os.makedirs(self.out_dir, exist_ok=True)
        written = []
        for name, text in self.texts.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.out_dir)
            with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
            os.chmod(tmp, _FILE_MODE)
            os.replace(tmp, os.path.join(self.out_dir, name))
            written.append(name)
        if self._tmp is not None:
            for name in sorted(os.listdir(self._tmp)):
                os.replace(os.path.join(self._tmp, name), os.path.join(self.out_dir, name))
                written.append(name)
        self.discard()
        return written

    def discard(self):
        if self._tmp is not None:
            shutil.rmtree(self._tmp, ignore_errors=True)
            self._tmp = None


# ---------------------------------------------------------------- analyze

def _knobs(cfg: ExperimentConfig | None, args):
    an = cfg.analysis if cfg else {}
    depth = args.depth_max if args.depth_max is not None else an.get("depth_max", sa.DEFAULT_DEPTH)
    cap = args.frontier_cap if args.frontier_cap is not None else an.get("frontier_cap", sa.DEFAULT_FRONTIER_CAP)
    if depth < 1 or cap < 1:
        raise UsageError("--depth-max and --frontier-cap must be >= 1")
    return depth, cap


def analyze(cfg: ExperimentConfig, depth: int, cap: int):
    """Dispatch on the configured theorem; returns ``(verdict, record)``."""
    th = cfg.analysis["theorem"]
    procs = cfg.procs
    if th == 5:
        res = sa.theorem5_verdicts(procs, [c.model for c in cfg.sensor_channels], depth, cap)
        record = {
            "theorem": 5,
            "verdict": res.verdict.value,
            "necessary_ok": res.necessary_ok,
            "sufficient_ok": res.sufficient_ok,
            "sensors": [
                {"process": int(procs.original_index[k]) + 1, "rho_sq": res.rho_sq[k],
                 "lambda": est.lambda_min, "product": res.rho_sq[k] * est.lambda_min,
                 "exact": est.exact}
                for k, est in enumerate(res.per_sensor)
            ],
        }
        return res.verdict, record
    ch = cfg.channel.model
    if th == 1:
        rep = sa.theorem1_verdict(procs, ch, depth, cap, early_stop=False)
    elif th == 2:
        rep = sa.theorem2_verdict(procs, ch)
    elif th == 3:
        rep = sa.theorem3_verdict(procs, ch, depth, cap, early_stop=False)
    else:
        rep = sa.theorem4_verdict(procs, ch)
    return rep.verdict, rep.to_dict()


def _human_report(record: dict) -> str:
    lines = [f"theorem {record['theorem']}: {record['verdict']}"]
    if "sensors" in record:
        lines.append(f"  necessary condition holds: {record['necessary_ok']}")
        lines.append(f"  sufficient condition holds: {record['sufficient_ok']}")
        for s in record["sensors"]:
            lines.append(f"  process {s['process']}: rho^2 = {s['rho_sq']:.6g}  "
                         f"lambda = {s['lambda']:.6g}  product = {s['product']:.6g}")
        return "\n".join(lines)
    lines.append(f"  rho_max^2          {record['rho_max_sq']:.10g}")
    lines.append(f"  lambda             {record['lambda']:.10g}")
    lines.append(f"  product            {record['product']:.10g}")
    if record.get("lambda_lower_bound") is not None:
        lines.append(f"  lambda lower bound {record['lambda_lower_bound']:.10g}")
    for d in record.get("per_depth", []):
        flag = "" if d["exact"] else "  (upper bound, frontier capped)"
        lines.append(f"  L={d['L']:<3d} lambda_L = {d['lambda_L']:.10g}{flag}")
    if record.get("note"):
        lines.append(f"  {record['note']}")
    return "\n".join(lines)


def cmd_analyze(args) -> int:
    cfg = load(args.config)
    depth, cap = _knobs(cfg, args)
    verdict, record = analyze(cfg, depth, cap)
    stage = Staging(_out_dir(cfg, args))
    if args.format == "csv":
        rows = [(k, record[k]) for k in sorted(record) if not isinstance(record[k], (list, dict))]
        stage.add_text("report.csv", csv_text(["key", "value"], rows))
        if "per_depth" in record:
            stage.add_text("report_depths.csv", csv_text(
                ["L", "lambda_L", "exact", "frontier_size", "argmin"],
                [(d["L"], d["lambda_L"], d["exact"], d["frontier_size"], encode_argmin(d["argmin"]))
                 for d in record["per_depth"]]))
        if "sensors" in record:
            stage.add_text("report_sensors.csv", csv_text(
                ["process", "rho_sq", "lambda", "product", "exact"],
                [(s["process"], s["rho_sq"], s["lambda"], s["product"], s["exact"])
                 for s in record["sensors"]]))
    else:
        stage.add_text("report.json", json_text(record))
    stage.commit()
    print(_human_report(record))
    return EXIT_CODES[verdict]


# ---------------------------------------------------------------- lambda curve

def lambda_curve_rows(est: sa.LambdaEstimate, set_id=None) -> list:
    rows = []
    for d in est.per_depth:
        row = (d.depth, d.value, d.exact, d.frontier_size, encode_argmin(d.argmin))
        rows.append(row if set_id is None else (set_id,) + row)
    return rows


def random_matrix_sets(seed: int, count: int, size: int = FIG2_SET_SIZE,
                       dim: int = FIG2_DIM, density: float = FIG2_DENSITY) -> list:
    """Sets of nonnegative matrices with uniform entries, each kept with prob. ``density``.

    Dense positive sets almost always give a flat curve; sparsity is what
    makes products of different factors interact.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        vals = rng.random((size, dim, dim))
        out.append(vals * (rng.random((size, dim, dim)) < density))
    return out


def cmd_lambda_curve(args) -> int:
    header = ["L", "lambda_L", "exact", "frontier_size", "argmin"]
    if args.random_sets is not None:
        if args.seed is None:
            raise UsageError("--random-sets needs --seed")
        if args.random_sets < 1:
            raise UsageError("--random-sets must be >= 1")
        depth, cap = _knobs(None, args)
        rows = []
        for k, mats in enumerate(random_matrix_sets(args.seed, args.random_sets), start=1):
            est = sa.lambda_search_matrices(mats, depth, cap,
                                            labels=[(i + 1,) for i in range(len(mats))])
            rows += lambda_curve_rows(est, k)
        header = ["set"] + header
        out_dir = args.out_dir or "."
    else:
        if args.config is None:
            raise UsageError("lambda-curve needs --config or --random-sets")
        cfg = load(args.config)
        if cfg.channel is None:
            raise UsageError("lambda-curve needs a 'channel' declaration")
        depth, cap = _knobs(cfg, args)
        builder = sa.Builder.HIDDEN if cfg.channel.model.kind == cm.HIDDEN else sa.Builder.ERROR
        rows = lambda_curve_rows(sa.lambda_search(cfg.channel.model, depth, cap, builder))
        out_dir = _out_dir(cfg, args)
    stage = Staging(out_dir)
    name = "lambda_curve." + args.format
    stage.add_text(name, table_text(header, rows, args.format))
    stage.commit()
    print(f"wrote {len(rows)} rows to {os.path.join(out_dir, name)}")
    return EXIT_OK


# ---------------------------------------------------------------- sweep region

def sweep_point(rho_sq: float, alphas, depth: int, cap: int) -> tuple:
    """``(theorem1_stable, corollary1_stable)`` for one independent-channel model."""
    cor = rho_sq * sa.independent_channel_lambda([a for a, _ in alphas]) < 1.0
    # grid edges (alpha in {0, 1}) give reducible or periodic chains
    ch = cm.compose_independent([cm.factor_from_alphas(*a) for a in alphas],
                                validate_ergodic=False)
    if rho_sq * sa.lambda_lower_bound(ch) >= 1.0:
        return False, cor
    est = sa.lambda_search(ch, depth, cap, stop_below=1.0 / rho_sq if rho_sq > 0 else math.inf)
    return bool(rho_sq * est.lambda_min < 1.0), cor


def sweep_rows(rho_sq: float, alphas, vary: int, grid: int, depth: int, cap: int) -> list:
    axis = np.linspace(0.0, 1.0, grid)
    rows = []
    for a00 in axis:
        for a11 in axis:
            point = list(alphas)
            point[vary] = (float(a00), float(a11))
            t1, c1 = sweep_point(rho_sq, point, depth, cap)
            rows.append((float(a00), float(a11), t1, c1))
    return rows


def cmd_sweep_region(args) -> int:
    cfg = load(args.config)
    spec = cfg.channel
    if spec is None or spec.alphas is None:
        raise UsageError("sweep-region needs an 'independent' channel declaration")
    grid = args.grid if args.grid is not None else cfg.sweep.get("grid", 101)
    if not isinstance(grid, int) or isinstance(grid, bool) or grid < 2:
        raise UsageError("grid must be an integer >= 2")
    vary = cfg.sweep.get("vary_factor", 1)
    if not isinstance(vary, int) or not 1 <= vary <= len(spec.alphas):
        raise UsageError(f"sweep.vary_factor must lie in 1..{len(spec.alphas)}")
    depth, cap = _knobs(cfg, args)
    rows = sweep_rows(cfg.procs.rho_max_sq, spec.alphas, vary - 1, grid, depth, cap)
    header = [f"alpha{vary}_00", f"alpha{vary}_11", "theorem1_stable", "corollary1_stable"]
    out_dir = _out_dir(cfg, args)
    stage = Staging(out_dir)
    name = "region." + args.format
    stage.add_text(name, table_text(header, rows, args.format))
    stage.commit()
    n_t1 = sum(r[2] for r in rows)
    n_c1 = sum(r[3] for r in rows)
    print(f"{len(rows)} grid points: {n_t1} stable by the search condition, "
          f"{n_c1} by the independent-channel condition")
    return EXIT_OK


# ---------------------------------------------------------------- compare knowledge

def knowledge_gap_rows(num_models: int, seed: int, depth: int, cap: int, num_freq: int = 2) -> list:
    """Rows ``(regime, model, lambda, lambda_prime, gap)`` for both regimes."""
    rng = np.random.default_rng(seed)
    labels = cm.binary_labels(num_freq)
    n = labels.shape[0]
    rows = []
    for regime in ("uniform", "dominant"):
        for k in range(1, num_models + 1):
            trans = cm.random_transition(rng, n, regime)
            ch = cm.MarkovChannelModel(trans, labels, validate_ergodic=False)
            lam = sa.lambda_search(ch, depth, cap).lambda_min
            lam_p = sa.theorem2_lambda(ch)
            rows.append((regime, k, lam, lam_p, lam - lam_p))
    return rows


def cmd_compare_knowledge(args) -> int:
    if args.seed is None:
        raise UsageError("compare-knowledge needs --seed")
    if args.num_models < 1:
        raise UsageError("--num-models must be >= 1")
    depth, cap = _knobs(None, args)
    rows = knowledge_gap_rows(args.num_models, args.seed, depth, cap)
    out_dir = args.out_dir or "."
    stage = Staging(out_dir)
    name = "knowledge." + args.format
    stage.add_text(name, table_text(["regime", "model", "lambda", "lambda_prime", "gap"], rows,
                                    args.format))
    stage.commit()
    for regime in ("uniform", "dominant"):
        gaps = [r[4] for r in rows if r[0] == regime]
        print(f"{regime}: median gap {float(np.median(gaps)):.6g}")
    return EXIT_OK


# ---------------------------------------------------------------- simulate

def period_table_for(cfg: ExperimentConfig, depth: int, cap: int):
    ch = cfg.channel.model
    simc = cfg.simulation
    table = simc.get("period_table", "auto")
    if table != "auto":
        return [tuple(v) for v in table]
    if simc.get("redundant", False):
        return [(1,) * ch.n_states]
    if simc.get("state_knowledge", "previous") == "current":
        return [cm.best_current_selection(ch)]
    return list(sa.lambda_search(ch, depth, cap).best.argmin)


def build_sim_config(cfg: ExperimentConfig, seed: int, depth: int, cap: int):
    simc = cfg.simulation
    if cfg.channel is None:
        raise UsageError("simulate needs a 'channel' declaration")
    ch = cfg.channel.model
    kind = simc.get("policy", sim.PERSISTENT_SERIAL)
    try:
        if kind == sim.PERSISTENT_SERIAL:
            table = period_table_for(cfg, depth, cap)
            policy = sim.make_persistent_serial(cfg.procs, ch, table)
        else:
            table = None
            policy = sim.make_baseline(kind, cfg.procs, ch)
        sc = sim.SimConfig(
            procs=cfg.procs, channel=ch, policy=policy,
            horizon=simc.get("horizon", 1_000_000), seed=seed,
            redundant_mode=simc.get("redundant", False),
            state_knowledge=simc.get("state_knowledge", "previous"),
            divergence_guard=simc["divergence_guard"],
            simulate_states=simc.get("simulate_states", False),
        )
        sc.validate()
    except ValueError as exc:
        raise UsageError(f"simulation section: {exc}") from None
    return sc, table


def analytic_j_for(sc: sim.SimConfig, table):
    """Closed-form long-run cost when it applies (one sensor, persistent, previous state)."""
    if (len(sc.procs) != 1 or sc.policy.kind != sim.PERSISTENT_SERIAL or sc.redundant_mode
            or sc.state_knowledge != "previous"):
        return None
    res = sa.cycle_analytics(sc.procs[0], sc.channel, sa.PeriodicSelection(table))
    return {"analytic_j": None if res.diverged else res.analytic_j,
            "expected_t": res.expected_t, "expected_c": res.expected_c,
            "diverged": res.diverged}


def cmd_simulate(args) -> int:
    cfg = load(args.config)
    seed = args.seed if args.seed is not None else cfg.simulation.get("seed")
    if seed is None:
        raise UsageError("simulate needs a seed (--seed or simulation.seed)")
    depth, cap = _knobs(cfg, args)
    sc, table = build_sim_config(cfg, seed, depth, cap)
    trace = sim.run(sc)
    summary = {
        "seed": seed,
        "horizon": sc.horizon,
        "slots": trace.slots,
        "policy": sc.policy.kind,
        "period_table": [list(v) for v in table] if table else None,
        "diverged": trace.diverged,
        "empirical_j": trace.empirical_j,
        "empirical_j_per_sensor": [float(x) for x in trace.empirical_j_per_sensor],
        "cycles": int(trace.cycle_length.size),
    }
    analytic = analytic_j_for(sc, table) if table else None
    if analytic is not None:
        summary["analytic"] = analytic
        summary["analytic_j"] = analytic["analytic_j"]
        if analytic["analytic_j"] and math.isfinite(trace.empirical_j):
            summary["relative_error"] = abs(trace.empirical_j - analytic["analytic_j"]) / analytic["analytic_j"]
    num_seeds = cfg.simulation["num_seeds"]
    if num_seeds > 1:
        ens = sim.run_ensemble(sc, num_seeds)
        summary["ensemble"] = {"num_seeds": ens.num_seeds, "mean_j": ens.mean_j,
                               "stderr_j": ens.stderr_j,
                               "divergence_fraction": ens.divergence_fraction,
                               "per_seed_j": ens.per_seed_j}
    out_dir = _out_dir(cfg, args)
    stage = Staging(out_dir)
    try:
        trace.write_slot_csv(stage.path("slots.csv"))
        trace.write_cycle_csv(stage.path("cycles.csv"))
        stage.add_text("summary.json", json_text(summary))
        stage.commit()
    finally:
        stage.discard()
    state = "diverged" if trace.diverged else "bounded"
    print(f"{trace.slots} slots, {summary['cycles']} cycles, {state}, "
          f"empirical J = {trace.empirical_j:.6g}")
    if summary.get("analytic_j") is not None:
        print(f"analytic J = {summary['analytic_j']:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def _out_dir(cfg: ExperimentConfig | None, args) -> str:
    if args.out_dir:
        return args.out_dir
    if cfg is not None and cfg.output.get("dir"):
        return str(cfg.output["dir"])
    return "."


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="remote-stability",
                                description="Stability analysis and simulation of remote "
                                            "estimation over Markov fading channels.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_config=True, default_format="csv"):
        sp.add_argument("--config", required=need_config, help="JSON experiment config")
        sp.add_argument("--out-dir", help="output directory (default: config output.dir or .)")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--depth-max", type=int, help="deepest product length searched")
        sp.add_argument("--frontier-cap", type=int, help="frontier size limit per depth")
        sp.add_argument("--format", choices=("csv", "json"), default=default_format)
        return sp

    common(sub.add_parser("analyze", help="stability verdict for a config"), default_format="json")
    lc = common(sub.add_parser("lambda-curve", help="lambda_L for L = 1..depth-max"),
                need_config=False)
    lc.add_argument("--random-sets", type=int,
                    help="instead of a config, draw this many sets of 8 random 4x4 matrices")
    sw = common(sub.add_parser("sweep-region", help="stability region over one factor's alphas"))
    sw.add_argument("--grid", type=int, help="points per axis (default 101)")
    ck = common(sub.add_parser("compare-knowledge",
                               help="lambda vs lambda' for random 4-state channels"),
                need_config=False)
    ck.add_argument("--num-models", type=int, default=25)
    common(sub.add_parser("simulate", help="Monte-Carlo run with trace export"))
    return p


COMMANDS = {
    "analyze": cmd_analyze,
    "lambda-curve": cmd_lambda_curve,
    "sweep-region": cmd_sweep_region,
    "compare-knowledge": cmd_compare_knowledge,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        src = getattr(args, "config", None)
        prefix = f"{src}: " if src else ""
        print(f"error: {prefix}{exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
