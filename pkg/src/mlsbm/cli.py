"""Command-line front end: instance generation, detection, rate reports,
estimation, and the replicated experiment harness.

The experiment path writes a long-format results CSV, a per-setting summary
CSV, a plot-description JSON, and rendered PNG figures. Exit codes: 0 on
success, 2 for usage problems, 3 for runtime failures (including any failed
replication inside an experiment).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .baseline import CoRegConfig, coreg_cluster
from .estimate import ProbEstimates, moment_p_hat, plugin_pq, separated_pq
from .metrics import misclustering, summarize
from .model import (ModelParams, balanced_assignment, experiment_params,
                    read_instance, sample_imlsbm, write_instance)
from .rates import rate_report
from .refine import (DetectionResult, RefineConfig, make_loo_spectral_init,
                     refine_generic, refine_provable)
from .spectral import (spectral_initialize, stdev_weights, uniform_weights,
                       variance_weights)

logger = logging.getLogger("mlsbm")

USAGE_EXIT = 2
RUNTIME_EXIT = 3
JOBS_ENV_VAR = "MLSBM_JOBS"

METHODS = ("spectral", "generic", "provable", "coreg")
SCENARIOS = ("compare-algs", "snr-sweep", "sensitivity", "weights",
             "baseline-compare")
WEIGHT_MODES = ("uniform", "variance", "stdev")

RESULT_COLUMNS = ("scenario", "n", "L", "rho", "c", "rho_input", "method",
                  "params_source", "layer_group", "replication",
                  "loss_global", "loss_individual_mean", "wall_ms")
FAILURE_COLUMNS = ("scenario", "n", "L", "rho", "c", "method", "replication",
                   "error")
SUMMARY_KEY = ("scenario", "n", "L", "rho", "c", "rho_input", "method",
               "params_source", "layer_group")
SUMMARY_STATS = ("mean", "sd", "q05", "q25", "q50", "q75", "q95")
_GROUP_ORDER = {"global": 0, "weak": 1, "intermediate": 2, "strong": 3}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path, columns, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r[col]) for col in columns])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc}") from exc


def _env_jobs() -> int:
    raw = os.environ.get(JOBS_ENV_VAR, "")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("ignoring non-integer %s=%r", JOBS_ENV_VAR, raw)
        return 1


def params_from_config(data: dict) -> ModelParams:
    """ModelParams from a config mapping: either explicit p/q vectors or a
    signal multiplier c fed through the standard layer-group design."""
    n = int(data["n"])
    rho = float(data.get("rho", 0.1))
    if "p" in data or "q" in data:
        p = np.asarray(data["p"], dtype=float)
        q = np.asarray(data["q"], dtype=float)
        return ModelParams(n=n, L=p.shape[0], rho=rho, p=p, q=q)
    L = int(data.get("L", 50))
    c = float(data.get("c", 5.0))
    scaling = str(data.get("scaling", "strong-mix"))
    params = experiment_params(n, L, c, scaling)
    return dataclasses.replace(params, rho=rho)


# ---------------------------------------------------------------------------
# method dispatch

def _make_weights(mode: str, p_ref, L: int) -> np.ndarray:
    if mode == "uniform":
        return uniform_weights(L)
    if mode == "variance":
        return variance_weights(p_ref)
    if mode == "stdev":
        return stdev_weights(p_ref)
    raise ValueError(f"unknown weight mode {mode!r}")


def run_method(record, method: str, params_source: str = "true",
               rho_input: float | None = None, weight_mode: str = "uniform",
               seed: int = 0, restarts: int = 10):
    """Run one detection method on a sampled instance.

    params_source "true" reads p and q from the stored parameters;
    "estimated" runs the moment estimate, a spectral initialization, and the
    plug-in estimate before any refinement. rho_input defaults to the true
    flip rate. Returns (DetectionResult, ordered stage names).
    """
    params, graph = record.params, record.graph
    if params_source not in ("true", "estimated"):
        raise ValueError(f"unknown params source {params_source!r}")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    estimated = params_source == "estimated"
    rho_in = params.rho if rho_input is None else float(rho_input)
    stages: list[str] = []

    def stage(name: str):
        stages.append(name)
        logger.info("stage: %s", name)

    if estimated:
        stage("moment-estimate")
        p_ref = moment_p_hat(graph)
    else:
        p_ref = params.p
    omega = _make_weights(weight_mode, p_ref, graph.L)

    if method == "coreg":
        stage("coreg")
        result = coreg_cluster(graph, CoRegConfig(seed=seed, restarts=restarts))
        return result, stages

    stage("spectral-init")
    z0 = spectral_initialize(graph, omega, p_ref, restarts=restarts, seed=seed)

    if method == "spectral":
        z_layer = np.repeat(z0[None, :], graph.L, axis=0)
        scores = np.zeros((graph.n, graph.L + 1))
        return DetectionResult(z_star_hat=z0, z_layer_hat=z_layer,
                               per_node_scores=scores), stages

    if estimated:
        stage("plugin-estimate")
        est = plugin_pq(graph, z0)
        p_use, q_use = separated_pq(est)
    else:
        p_use, q_use = params.p, params.q

    if method == "generic":
        stage("refine")
        cfg = RefineConfig(p=p_use, q=q_use, rho_input=rho_in)
        return refine_generic(z0, graph, cfg), stages

    # provable: leave-one-out initializations drive the refinement
    stage("leave-one-out-init")
    init_fn = make_loo_spectral_init(graph, omega, p_ref,
                                     restarts=restarts, seed=seed)
    stage("refine")
    cfg = RefineConfig(p=p_use, q=q_use, rho_input=rho_in, mode="provable")
    return refine_provable(graph, cfg, init_fn), stages


def evaluate(record, result) -> tuple[float, np.ndarray]:
    """(global loss, per-layer individual losses) against the stored truth."""
    loss_g = misclustering(result.z_star_hat, record.z_star).value
    losses = np.array([misclustering(result.z_layer_hat[ell],
                                     record.z_layers[ell]).value
                       for ell in range(record.params.L)])
    return loss_g, losses


# ---------------------------------------------------------------------------
# experiment harness

@dataclasses.dataclass
class ExperimentConfig:
    """One experiment: a scenario, its parameter grids, and run options."""

    scenario: str
    n: int = 400
    L: int = 50
    rho: float = 0.1
    c_grid: tuple = ()
    rho_grid: tuple = ()
    rho_input_grid: tuple = ()
    replications: int = 100
    coreg_replications: int | None = None
    methods: tuple = ()
    params_source: str = "true"
    weight_modes: tuple = ()
    scaling: str = "strong-mix"
    seed: int = 0
    out_dir: str = "mlsbm-results"
    jobs: int = 1
    restarts: int = 10

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.coreg_replications is not None and self.coreg_replications < 1:
            raise ValueError("coreg_replications must be >= 1")
        if not self.c_grid or not self.rho_grid:
            raise ValueError("c_grid and rho_grid must be nonempty")
        if self.scenario == "sensitivity" and not self.rho_input_grid:
            raise ValueError("sensitivity needs a nonempty rho_input_grid")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        for wm in self.weight_modes:
            if wm not in WEIGHT_MODES:
                raise ValueError(f"unknown weight mode {wm!r}")
        if self.params_source not in ("true", "estimated"):
            raise ValueError(f"unknown params source {self.params_source!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


_CONFIG_KEYS = {"scenario", "n", "L", "rho", "c", "c_grid", "rho_grid",
                "rho_input_grid", "replications", "coreg_replications",
                "methods", "params_source", "weight_modes", "scaling",
                "seed", "out_dir", "jobs", "restarts"}

_SCENARIO_DEFAULTS = {
    "compare-algs": dict(c_grid=(2.0, 5.0), methods=("generic", "provable")),
    "snr-sweep": dict(c_grid=(1.5, 2.0, 3.0, 5.0), methods=("generic",)),
    "sensitivity": dict(c_grid=(5.0,), methods=("generic",),
                        rho_input_grid=(0.01, 0.033, 0.1, 0.2, 0.3)),
    "weights": dict(c_grid=(2.0, 3.0, 4.0, 5.0), methods=("spectral",),
                    weight_modes=("uniform", "variance", "stdev")),
    "baseline-compare": dict(c_grid=(1.5, 2.0, 3.0, 5.0),
                             methods=("generic", "coreg")),
}


def _apply_scenario_defaults(cfg: ExperimentConfig) -> None:
    defaults = _SCENARIO_DEFAULTS.get(cfg.scenario, {})
    for name, value in defaults.items():
        if not getattr(cfg, name):
            setattr(cfg, name, value)
    if not cfg.rho_grid:
        cfg.rho_grid = (cfg.rho,)
    if not cfg.weight_modes:
        cfg.weight_modes = ("uniform",)


def load_experiment_config(args) -> ExperimentConfig:
    data = _load_json(args.config) if args.config else {}
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    scenario = getattr(args, "scenario", None) or data.get("scenario")
    if not scenario:
        raise ValueError("a scenario is required (--scenario or config file)")
    kw: dict = {"scenario": str(scenario)}
    for k in ("n", "L", "replications", "seed", "jobs", "restarts"):
        if k in data:
            kw[k] = int(data[k])
    if data.get("coreg_replications") is not None:
        kw["coreg_replications"] = int(data["coreg_replications"])
    if "rho" in data:
        kw["rho"] = float(data["rho"])
    if "c" in data and "c_grid" not in data:
        kw["c_grid"] = (float(data["c"]),)
    for k in ("c_grid", "rho_grid", "rho_input_grid"):
        if k in data:
            kw[k] = tuple(float(v) for v in data[k])
    for k in ("methods", "weight_modes"):
        if k in data:
            kw[k] = tuple(str(v) for v in data[k])
    for k in ("params_source", "scaling", "out_dir"):
        if k in data:
            kw[k] = str(data[k])
    cfg = ExperimentConfig(**kw)

    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.jobs is not None:
        cfg.jobs = args.jobs
    elif "jobs" not in data:
        cfg.jobs = _env_jobs()
    if args.full:
        cfg.n, cfg.L, cfg.replications = 1000, 100, 500
    if getattr(args, "reps", None) is not None:
        cfg.replications = args.reps
    _apply_scenario_defaults(cfg)
    cfg.validate()
    return cfg


def method_variants(cfg: ExperimentConfig):
    """Run variants as (label, method, params_source, rho_input, weight_mode).

    rho_input None means the true flip rate. The weights scenario suffixes
    the method label with the weighting mode; the sensitivity scenario adds
    one true-parameter reference run ahead of the rho_input sweep.
    """
    out = []
    if cfg.scenario == "sensitivity":
        for m in cfg.methods:
            out.append((m, m, "true", None, "uniform"))
            for ri in cfg.rho_input_grid:
                out.append((m, m, "estimated", float(ri), "uniform"))
        return out
    if cfg.scenario == "weights":
        for m in cfg.methods:
            for wm in cfg.weight_modes:
                out.append((f"{m}-{wm}", m, cfg.params_source, None, wm))
        return out
    return [(m, m, cfg.params_source, None, cfg.weight_modes[0])
            for m in cfg.methods]


def _run_replication(cfg_dict: dict, c: float, rho: float, r: int):
    """One replication at one grid point: sample once, run every variant."""
    cfg = ExperimentConfig(**cfg_dict)
    params = experiment_params(cfg.n, cfg.L, c, cfg.scaling)
    params = dataclasses.replace(params, rho=rho)
    seed_r = cfg.seed + r
    record = sample_imlsbm(params, balanced_assignment(cfg.n), seed_r)
    groups = params.layer_groups
    rows, failures = [], []
    for label, method, psrc, ri, wm in method_variants(cfg):
        if (method == "coreg" and cfg.coreg_replications is not None
                and r >= cfg.coreg_replications):
            continue
        t0 = time.perf_counter()
        try:
            result, _ = run_method(record, method, psrc, ri, wm,
                                   seed=seed_r, restarts=cfg.restarts)
        except Exception as exc:
            logger.error("replication %d method %s failed: %s", r, label, exc)
            failures.append({"scenario": cfg.scenario, "n": cfg.n, "L": cfg.L,
                             "rho": rho, "c": c, "method": label,
                             "replication": r,
                             "error": f"{type(exc).__name__}: {exc}"})
            continue
        wall_ms = (time.perf_counter() - t0) * 1e3
        loss_g, per_layer = evaluate(record, result)
        base = {"scenario": cfg.scenario, "n": cfg.n, "L": cfg.L, "rho": rho,
                "c": c, "rho_input": rho if ri is None else ri,
                "method": label, "params_source": psrc, "replication": r,
                "loss_global": loss_g, "wall_ms": wall_ms}
        rows.append({**base, "layer_group": "global",
                     "loss_individual_mean": float(per_layer.mean())})
        for g in ("weak", "intermediate", "strong"):
            mask = np.array([gg == g for gg in groups])
            if mask.any():
                rows.append({**base, "layer_group": g,
                             "loss_individual_mean": float(per_layer[mask].mean())})
    return rows, failures


def _row_key(row):
    return (row["scenario"], row["n"], row["L"], row["rho"], row["c"],
            row["rho_input"], row["method"], row["params_source"],
            _GROUP_ORDER.get(row["layer_group"], 99), row["replication"])


def build_summary(rows):
    """Per-setting summaries of both loss columns; rows must be sorted."""
    out = []
    for key, grp in itertools.groupby(
            rows, key=lambda r: tuple(r[k] for k in SUMMARY_KEY)):
        grp = list(grp)
        sg = summarize(g["loss_global"] for g in grp)
        si = summarize(g["loss_individual_mean"] for g in grp)
        d = dict(zip(SUMMARY_KEY, key))
        d["replications"] = sg.count
        for stat in SUMMARY_STATS:
            d[f"loss_global_{stat}"] = getattr(sg, stat)
        for stat in SUMMARY_STATS:
            d[f"loss_individual_mean_{stat}"] = getattr(si, stat)
        out.append(d)
    return out


SUMMARY_COLUMNS = (list(SUMMARY_KEY) + ["replications"]
                   + [f"loss_global_{s}" for s in SUMMARY_STATS]
                   + [f"loss_individual_mean_{s}" for s in SUMMARY_STATS])


def emit_plots(cfg: ExperimentConfig, srows, out_dir: str) -> None:
    """Plot-description JSON plus rendered PNG figures for one scenario."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plots_dir = os.path.join(out_dir, "plots")
    os.makedirs(plots_dir, exist_ok=True)

    if cfg.scenario == "sensitivity":
        xcol, xlabel = "rho_input", "rho_input"
        xf = float
    elif len(cfg.rho_grid) > 1:
        xcol, xlabel = "rho", "log(1/rho)"
        xf = lambda v: math.log(1.0 / float(v))
    else:
        xcol, xlabel = "c", "c"
        xf = float

    def collect(rows_subset, ymean, ysd, series_of):
        series = {}
        for r in rows_subset:
            series.setdefault(series_of(r), []).append(
                (xf(r[xcol]), float(r[ymean]), float(r[ysd])))
        out = []
        for label in sorted(series):
            pts = sorted(series[label])
            out.append({"label": label,
                        "x": [p[0] for p in pts],
                        "y": [p[1] for p in pts],
                        "sd": [p[2] for p in pts]})
        return out

    def tag(r):
        return (r["method"] if cfg.scenario != "sensitivity"
                else f"{r['method']}[{r['params_source']}]")

    g_rows = [r for r in srows if r["layer_group"] == "global"]
    i_rows = [r for r in srows if r["layer_group"] != "global"]
    panels = {
        "global": collect(g_rows, "loss_global_mean", "loss_global_sd", tag),
        "individual": collect(i_rows, "loss_individual_mean_mean",
                              "loss_individual_mean_sd",
                              lambda r: f"{tag(r)}:{r['layer_group']}"),
    }
    desc = {"scenario": cfg.scenario, "xlabel": xlabel,
            "ylabel": "misclustering proportion", "panels": panels}
    with open(os.path.join(plots_dir, f"{cfg.scenario}.json"), "w") as fh:
        json.dump(desc, fh, indent=2, sort_keys=True)
        fh.write("\n")

    for name, series in panels.items():
        if not series:
            continue
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for s in series:
            ax.errorbar(s["x"], s["y"], yerr=s["sd"], marker="o",
                        capsize=3, label=s["label"])
        ax.set_xlabel(xlabel)
        ax.set_ylabel("misclustering proportion")
        ax.set_title(f"{cfg.scenario}: {name}")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(os.path.join(plots_dir, f"{cfg.scenario}_{name}.png"),
                    dpi=120)
        plt.close(fig)


def run_experiment(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    tasks = [(c, rho, r) for c in cfg.c_grid for rho in cfg.rho_grid
             for r in range(cfg.replications)]
    cfg_dict = dataclasses.asdict(cfg)
    rows, failures = [], []
    t0 = time.perf_counter()
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_run_replication, cfg_dict, c, rho, r)
                       for c, rho, r in tasks]
            for fut in futures:
                rr, ff = fut.result()
                rows.extend(rr)
                failures.extend(ff)
    else:
        for c, rho, r in tasks:
            rr, ff = _run_replication(cfg_dict, c, rho, r)
            rows.extend(rr)
            failures.extend(ff)
    elapsed = time.perf_counter() - t0

    rows.sort(key=_row_key)
    failures.sort(key=lambda f: (f["scenario"], f["c"], f["rho"], f["method"],
                                 f["replication"]))
    results_path = os.path.join(cfg.out_dir, "results.csv")
    _write_csv(results_path, RESULT_COLUMNS, rows)
    _write_csv(os.path.join(cfg.out_dir, "failures.csv"), FAILURE_COLUMNS,
               failures)
    srows = build_summary(rows)
    _write_csv(os.path.join(cfg.out_dir, "summary.csv"), SUMMARY_COLUMNS,
               srows)
    emit_plots(cfg, srows, cfg.out_dir)
    print(f"{cfg.scenario}: {len(rows)} result rows, {len(failures)} failed "
          f"runs, {elapsed:.1f} s; wrote {results_path}")
    return RUNTIME_EXIT if failures else 0


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args) -> int:
    data = _load_json(args.config) if args.config else {}
    merged = dict(data)
    for key, val in (("n", args.n), ("L", args.layers), ("rho", args.rho),
                     ("c", args.c), ("scaling", args.scaling)):
        if val is not None:
            merged[key] = val
    merged.setdefault("n", 400)
    params = params_from_config(merged)
    reps = args.reps if args.reps is not None else int(merged.get("replications", 1))
    seed = args.seed if args.seed is not None else int(merged.get("seed", 0))
    if reps < 1:
        raise ValueError("replications must be >= 1")
    os.makedirs(args.out, exist_ok=True)
    for r in range(reps):
        record = sample_imlsbm(params, balanced_assignment(params.n), seed + r)
        path = os.path.join(args.out, f"instance_{r:04d}.txt")
        try:
            write_instance(record, path)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    print(f"wrote {reps} instance file(s) to {args.out}")
    return 0


def cmd_detect(args) -> int:
    record = read_instance(args.instance)
    seed = args.seed if args.seed is not None else record.seed
    rho_in = float(args.rho_input if args.rho_input is not None
                   else record.params.rho)
    t0 = time.perf_counter()
    result, stages = run_method(record, args.method, args.params,
                                args.rho_input, args.weights, seed=seed)
    wall_ms = (time.perf_counter() - t0) * 1e3
    loss_g, per_layer = evaluate(record, result)
    loss_i = float(per_layer.mean())

    out_dir = args.out or os.path.dirname(os.path.abspath(args.instance))
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.instance))[0]
    path = os.path.join(out_dir, f"detect_{stem}_{args.method}.txt")
    lines = [f"instance {args.instance}",
             f"method {args.method}",
             f"params_source {args.params}",
             f"rho_input {rho_in!r}",
             f"weights {args.weights}",
             f"seed {seed}",
             "stages " + ",".join(stages),
             f"aligned {str(result.aligned).lower()}",
             f"loss_global {loss_g!r}",
             f"loss_individual_mean {loss_i!r}",
             f"wall_ms {wall_ms!r}",
             "z_star_hat " + " ".join(f"{v:+d}" for v in result.z_star_hat)]
    for ell in range(record.params.L):
        lines.append(f"z_layer_hat {ell} "
                     + " ".join(f"{v:+d}" for v in result.z_layer_hat[ell]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{args.method} on {args.instance}: loss_global={loss_g!r} "
          f"loss_individual_mean={loss_i!r} ({wall_ms:.1f} ms); wrote {path}")
    return 0


def cmd_rate(args) -> int:
    if args.config:
        data = _load_json(args.config)
    elif args.n is not None:
        data = {"n": args.n}
        if args.layers is not None:
            data["L"] = args.layers
        if args.rho is not None:
            data["rho"] = args.rho
        if args.c is not None:
            data["c"] = args.c
        if args.scaling is not None:
            data["scaling"] = args.scaling
    else:
        raise ValueError("rate needs --config or at least --n")
    params = params_from_config(data)
    report = rate_report(params, t_grid=args.t_grid)

    os.makedirs(args.out, exist_ok=True)
    txt_path = os.path.join(args.out, "rate_report.txt")
    argmin = "|".join(str(i) for i in report.global_argmin)
    lines = [f"n {report.n}",
             f"L {report.L}",
             f"rho {report.rho!r}",
             f"J_rho {report.J_rho!r}",
             f"m {report.m!r}",
             f"global_snr_min {report.global_snr_min!r}",
             f"global_argmin {argmin}",
             f"global_complement_parity {report.global_complement_parity}",
             f"global_exponent {report.global_exponent!r}"]
    with open(txt_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    layer_rows = [{"layer": pl.layer, "snr_min": pl.snr_min,
                   "argmin_set": "|".join(str(i) for i in pl.argmin_set),
                   "J_single": pl.J_single, "exponent": pl.exponent}
                  for pl in report.per_layer]
    _write_csv(os.path.join(args.out, "rate_layers.csv"),
               ("layer", "snr_min", "argmin_set", "J_single", "exponent"),
               layer_rows)
    print(f"global SNR exponent {report.global_snr_min!r} "
          f"(error rate factor {report.global_exponent!r}); wrote {txt_path}")
    return 0


def cmd_estimate(args) -> int:
    record = read_instance(args.instance)
    graph, params = record.graph, record.params
    seed = args.seed if args.seed is not None else record.seed
    logger.info("stage: moment-estimate")
    p_m = moment_p_hat(graph)
    logger.info("stage: spectral-init")
    z0 = spectral_initialize(graph, uniform_weights(graph.L), p_m, seed=seed)
    logger.info("stage: plugin-estimate")
    est = plugin_pq(graph, z0)
    known = ProbEstimates.from_params(params)

    out_dir = args.out or os.path.dirname(os.path.abspath(args.instance))
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.instance))[0]
    path = os.path.join(out_dir, f"estimates_{stem}.csv")
    rows = [{"layer": ell,
             "p_true": params.p[ell], "q_true": params.q[ell],
             "tilde_p": known.tilde_p[ell], "tilde_q": known.tilde_q[ell],
             "p_moment": p_m[ell],
             "p_hat": est.p_hat[ell], "q_hat": est.q_hat[ell],
             "swapped": int(ell in est.swapped),
             "fallback": int(est.fallback)}
            for ell in range(params.L)]
    _write_csv(path, ("layer", "p_true", "q_true", "tilde_p", "tilde_q",
                      "p_moment", "p_hat", "q_hat", "swapped", "fallback"),
               rows)
    err_p = float(np.abs(est.p_hat - known.tilde_p).mean())
    err_q = float(np.abs(est.q_hat - known.tilde_q).mean())
    print(f"estimates for {args.instance}: mean |p_hat - tilde_p| = {err_p!r},"
          f" mean |q_hat - tilde_q| = {err_q!r}; wrote {path}")
    return 0


def cmd_experiment(args) -> int:
    cfg = load_experiment_config(args)
    if not args.verbose:
        # per-stage lines are useful on a single detect run but drown a
        # replicated experiment; failures still surface at WARNING+
        logger.setLevel(logging.WARNING)
    return run_experiment(cfg)


# ---------------------------------------------------------------------------
# parser and entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mlsbm",
        description="Community detection in noisy multilayer networks: "
                    "generate instances, detect communities, report error "
                    "exponents, estimate parameters, run experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample instances into text files")
    g.add_argument("--config", help="JSON file with n/L/rho/c or p/q lists")
    g.add_argument("--n", type=int)
    g.add_argument("--layers", type=int, help="number of layers L")
    g.add_argument("--rho", type=float)
    g.add_argument("--c", type=float, help="signal strength multiplier")
    g.add_argument("--scaling", choices=("strong-mix", "weak", "intermediate"))
    g.add_argument("--reps", type=int, help="number of instances")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", default="mlsbm-results")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("detect", help="run one detection method on an instance")
    d.add_argument("instance", help="instance file from generate")
    d.add_argument("--method", choices=METHODS, default="generic")
    d.add_argument("--params", choices=("true", "estimated"), default="true")
    d.add_argument("--rho-input", dest="rho_input", type=float,
                   help="flip rate fed to refinement (default: the true one)")
    d.add_argument("--weights", choices=WEIGHT_MODES, default="uniform")
    d.add_argument("--seed", type=int,
                   help="algorithm seed (default: the instance seed)")
    d.add_argument("--out", help="output directory (default: instance's)")
    d.set_defaults(func=cmd_detect)

    rt = sub.add_parser("rate", help="error-exponent report for parameters")
    rt.add_argument("--config", help="JSON with n/L/rho plus c or p/q lists")
    rt.add_argument("--n", type=int)
    rt.add_argument("--layers", type=int)
    rt.add_argument("--rho", type=float)
    rt.add_argument("--c", type=float)
    rt.add_argument("--scaling", choices=("strong-mix", "weak", "intermediate"))
    rt.add_argument("--t-grid", dest="t_grid", type=int, default=2001)
    rt.add_argument("--out", default="mlsbm-results")
    rt.set_defaults(func=cmd_rate)

    e = sub.add_parser("estimate", help="estimate p and q from an instance")
    e.add_argument("instance")
    e.add_argument("--seed", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("experiment", help="replicated experiment to CSV+plots")
    x.add_argument("--config", help="JSON experiment configuration")
    x.add_argument("--scenario", choices=SCENARIOS)
    x.add_argument("--seed", type=int)
    x.add_argument("--out")
    x.add_argument("--jobs", type=int,
                   help=f"parallel replications (default ${JOBS_ENV_VAR} or 1)")
    x.add_argument("--reps", type=int, help="override replication count")
    x.add_argument("--full", action="store_true",
                   help="full-scale run: n=1000, L=100, 500 replications")
    x.add_argument("--verbose", action="store_true",
                   help="log each pipeline stage of every replication")
    x.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args))
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except Exception as exc:
        traceback.print_exc()
        print(f"runtime error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
