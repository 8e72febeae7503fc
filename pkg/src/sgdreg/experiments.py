"""Experiment configuration and the commands behind the command-line runner."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .analysis import EnsembleStats, run_ensemble
from .bounds import THEOREM_KEYS, BoundReport, run_bound_suite
from .model import (
    LinearProblem,
    NoisyObservation,
    SourceConfig,
    add_noise,
    add_scaled_noise,
    build_synthetic_problem,
    discretize_fredholm,
    save_problem_json,
    spectral_split,
    write_matrix_csv,
)
from .solvers import ScheduleError, StepSchedule, run_landweber, run_sgd

FORMATS = ("csv", "json", "svg")
PROBLEM_KINDS = ("phillips", "gravity", "shaw", "synthetic")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending line when known."""


@dataclass
class ExperimentConfig:
    problem: dict = field(default_factory=lambda: {"kind": "phillips", "size": 1000})
    noise_levels: list = field(default_factory=lambda: [1e-2])
    noise_mode: str = "relative"  # relative: delta * max|y| * N(0,1); absolute: ||xi|| = delta
    noise_seed: int = 1
    alphas: list = field(default_factory=lambda: [0.1])
    c0: object = "auto"
    k_max: int = 10_000
    n_runs: int = 100
    truncation_level: int = 5
    seed: int = 0
    grid: str = "log"
    chunk_size: int = 100
    formats: list = field(default_factory=lambda: ["csv", "json"])
    theorems: list | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def _line_of(raw: str | None, key: str) -> int | None:
    if raw is None:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(raw.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _fail(raw, source, key, msg):
    line = _line_of(raw, key)
    where = f"{source}:{line}" if line is not None else source
    raise ConfigError(f"{where}: field '{key}': {msg}")


def config_from_dict(d: dict, raw: str | None = None, source: str = "<config>") -> ExperimentConfig:
    """Validate a parsed config before any computation."""
    if not isinstance(d, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    for key in d:
        if key not in known:
            _fail(raw, source, key, f"unknown field; expected one of {sorted(known)}")
    cfg = ExperimentConfig(**d)

    def num_list(key, lo, hi, lo_open=False, hi_open=False, min_len=1):
        v = getattr(cfg, key)
        if not isinstance(v, list) or len(v) < min_len:
            _fail(raw, source, key, f"must be a list of at least {min_len} numbers")
        for x in v:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                _fail(raw, source, key, f"entry {x!r} is not a finite number")
            if x < lo or (lo_open and x == lo) or x > hi or (hi_open and x == hi):
                _fail(raw, source, key, f"entry {x!r} outside {'(' if lo_open else '['}{lo}, {hi}{')' if hi_open else ']'}")

    num_list("noise_levels", 0.0, math.inf)
    num_list("alphas", 0.0, 1.0, hi_open=True)
    if cfg.noise_mode not in ("relative", "absolute"):
        _fail(raw, source, "noise_mode", "must be 'relative' or 'absolute'")
    for key, lo in (("k_max", 1), ("n_runs", 1), ("truncation_level", 1), ("chunk_size", 1), ("seed", 0), ("noise_seed", 0)):
        v = getattr(cfg, key)
        if isinstance(v, bool) or not isinstance(v, int) or v < lo:
            _fail(raw, source, key, f"must be an integer >= {lo}")
    if not (cfg.c0 == "auto" or (isinstance(cfg.c0, (int, float)) and not isinstance(cfg.c0, bool) and cfg.c0 > 0)):
        _fail(raw, source, "c0", "must be 'auto' or a positive number")
    if cfg.grid not in ("log", "all"):
        _fail(raw, source, "grid", "must be 'log' or 'all'")
    if not isinstance(cfg.formats, list) or any(f not in FORMATS for f in cfg.formats):
        _fail(raw, source, "formats", f"entries must be among {list(FORMATS)}")
    if cfg.theorems is not None:
        if not isinstance(cfg.theorems, list) or any(t not in THEOREM_KEYS for t in cfg.theorems):
            _fail(raw, source, "theorems", f"entries must be among {list(THEOREM_KEYS)}")
    _validate_problem(cfg.problem, raw, source)
    # kept for line-addressed errors raised after problem assembly
    cfg._raw, cfg._source = raw, source
    return cfg


def _validate_problem(pr, raw, source):
    if not isinstance(pr, dict) or pr.get("kind") not in PROBLEM_KINDS:
        _fail(raw, source, "kind" if isinstance(pr, dict) and "kind" in pr else "problem",
              f"problem kind must be one of {list(PROBLEM_KINDS)}")
    if pr["kind"] == "synthetic":
        for key in ("m", "n"):
            v = pr.get(key)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                _fail(raw, source, key, "must be a positive integer")
        spec = pr.get("spectrum")
        if not isinstance(spec, (list, dict)):
            _fail(raw, source, "spectrum", "must be a list of singular values or a polynomial spectrum object")
        src = pr.get("source", {"p": 0.5})
        if not isinstance(src, dict) or not isinstance(src.get("p"), (int, float)) or src["p"] < 0:
            _fail(raw, source, "source", "must be an object with a nonnegative exponent 'p'")
    else:
        v = pr.get("size")
        if isinstance(v, bool) or not isinstance(v, int) or v < 4:
            _fail(raw, source, "size", "must be an integer >= 4")


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        d = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if overrides:
        d = dict(d, **{k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(d, raw, str(path))


# --- assembly --------------------------------------------------------------

def build_problem(spec: dict) -> tuple[LinearProblem, SourceConfig | None]:
    try:
        return _build_problem(spec)
    except ValueError as exc:
        raise ConfigError(f"problem assembly failed: {exc}") from None


def _build_problem(spec: dict) -> tuple[LinearProblem, SourceConfig | None]:
    if spec["kind"] != "synthetic":
        return discretize_fredholm(spec["kind"], spec["size"]), None
    m, n = spec["m"], spec["n"]
    src = spec.get("source", {"p": 0.5})
    w = src.get("w", "gaussian")
    if w == "ones":
        w = np.ones(m)
    elif w == "gaussian":
        w = np.random.default_rng(src.get("seed", 0)).standard_normal(m)
    source = SourceConfig(float(src["p"]), np.asarray(w, dtype=float))
    prob = build_synthetic_problem(m, n, spec["spectrum"], source, seed=spec.get("seed", 0))
    return prob, source


def make_observation(problem: LinearProblem, cfg: ExperimentConfig, delta: float) -> NoisyObservation:
    if delta == 0:
        return NoisyObservation.exact(problem)
    if cfg.noise_mode == "relative":
        return add_noise(problem, delta, cfg.noise_seed)
    return add_scaled_noise(problem, delta, cfg.noise_seed)


def make_schedule(problem: LinearProblem, cfg: ExperimentConfig, alpha: float) -> StepSchedule:
    try:
        return StepSchedule.for_problem(problem, alpha, None if cfg.c0 == "auto" else float(cfg.c0))
    except ScheduleError as exc:
        raw, source = getattr(cfg, "_raw", None), getattr(cfg, "_source", "<config>")
        _fail(raw, source, "c0" if cfg.c0 != "auto" else "alphas", f"schedule rejected for alpha={alpha}: {exc}")


def _ensemble(problem, obs, sched, cfg, projectors=None) -> EnsembleStats:
    if cfg.n_runs == 1:
        traj = run_sgd(problem, obs, sched, cfg.k_max, cfg.seed, grid=cfg.grid, projectors=projectors)
        return EnsembleStats.from_trajectory(traj)
    return run_ensemble(problem, obs, sched, cfg.k_max, cfg.n_runs, cfg.seed, grid=cfg.grid,
                        projectors=projectors, chunk_size=cfg.chunk_size)


def _tag(x: float) -> str:
    return repr(float(x)).replace(".", "p").replace("-", "m")


def _curve_summary(stats: EnsembleStats) -> dict:
    k, e = stats.argmin_error()
    j = int(np.argmin(stats.mean_error_sq))
    return {"min_error": e, "argmin_k": k, "se_at_min": float(stats.se_error_sq[j]),
            "final_error": float(stats.mean_error_sq[-1]), "initial_error": float(stats.mean_error_sq[0])}


def _prepare_out(out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_summary(out: Path, cfg: ExperimentConfig, body: dict, name: str = "summary.json") -> None:
    io.write_json(out / name, dict(body, config=cfg.to_dict(), config_digest=cfg.digest()))


# --- commands --------------------------------------------------------------

def cmd_sweep_alpha(cfg: ExperimentConfig, out) -> dict:
    """Error and residual curves for every (alpha, delta) pair."""
    if len(cfg.alphas) < 2:
        raise ConfigError("sweep-alpha needs at least two alphas")
    out = _prepare_out(out)
    problem, _ = build_problem(cfg.problem)
    curves = {}
    series = {}
    for delta in cfg.noise_levels:
        obs = make_observation(problem, cfg, delta)
        for alpha in cfg.alphas:
            sched = make_schedule(problem, cfg, alpha)
            stats = _ensemble(problem, obs, sched, cfg)
            name = f"sweep_alpha{_tag(alpha)}_delta{_tag(delta)}"
            if "csv" in cfg.formats:
                stats.to_csv(out / f"{name}.csv")
            curves[name] = dict(_curve_summary(stats), alpha=alpha, delta=delta)
            series.setdefault(delta, []).append((f"alpha={alpha}", stats.k_grid, stats.mean_error_sq))
    if "svg" in cfg.formats:
        from .plotting import line_chart
        for delta, lines in series.items():
            line_chart(out / f"sweep_alpha_delta{_tag(delta)}.svg", lines, "k", "mean squared error",
                       f"delta={delta}")
    summary = {"command": "sweep-alpha", "curves": curves}
    _write_summary(out, cfg, summary)
    return summary


def cmd_compare_landweber(cfg: ExperimentConfig, out) -> dict:
    """SGD ensemble against Landweber with one Landweber step counted as n SGD steps."""
    out = _prepare_out(out)
    problem, _ = build_problem(cfg.problem)
    n = problem.n
    alpha = cfg.alphas[0]
    body = {}
    for delta in cfg.noise_levels:
        obs = make_observation(problem, cfg, delta)
        sched = make_schedule(problem, cfg, alpha)
        stats = _ensemble(problem, obs, sched, cfg)
        lw_steps = max(1, cfg.k_max // n)
        lw = run_landweber(problem, obs, sched, lw_steps)
        # Landweber iterate x_j is aligned with SGD iteration count (j - 1) n + 1
        lw_k = (lw.k - 1) * n + 1
        name = f"landweber_delta{_tag(delta)}"
        if "csv" in cfg.formats:
            stats.to_csv(out / f"sgd_{name}.csv")
            io.write_columns_csv(out / f"{name}.csv", {"k": lw_k, "landweber_step": lw.k, "error_sq": lw.errors_sq,
                                                      "residual_sq": lw.residuals_sq})
        sgd_epoch = float(np.interp(n + 1, stats.k_grid, stats.mean_error_sq))
        lw_one = float(lw.errors_sq[1]) if lw.errors_sq.size > 1 else float("nan")
        crossover = _crossover(stats.k_grid, stats.mean_error_sq, lw_k, lw.errors_sq)
        body[name] = {"delta": delta, "alpha": alpha, "sgd_error_after_epoch": sgd_epoch,
                      "landweber_error_after_one_step": lw_one, "crossover_k": crossover,
                      "sgd": _curve_summary(stats),
                      "landweber": {"min_error": float(lw.errors_sq.min()),
                                    "argmin_k": int(lw_k[int(np.argmin(lw.errors_sq))])}}
        if "svg" in cfg.formats:
            from .plotting import line_chart
            line_chart(out / f"{name}.svg", [("SGD", stats.k_grid, stats.mean_error_sq),
                                             ("Landweber", lw_k, lw.errors_sq)],
                       "SGD iterations", "mean squared error", f"delta={delta}")
    summary = {"command": "compare-landweber", "curves": body}
    _write_summary(out, cfg, summary)
    return summary


def _crossover(k_sgd, e_sgd, k_lw, e_lw):
    """First Landweber checkpoint (after the start) where Landweber is at least as accurate as SGD."""
    for k, e in zip(k_lw[1:], e_lw[1:]):
        if k > k_sgd[-1]:
            break
        if e <= np.interp(k, k_sgd, e_sgd):
            return int(k)
    return None


def cmd_frequency_decay(cfg: ExperimentConfig, out) -> dict:
    """Total, low- and high-frequency error curves per noise level."""
    out = _prepare_out(out)
    problem, _ = build_problem(cfg.problem)
    proj = spectral_split(problem.decomposition, cfg.truncation_level)
    alpha = cfg.alphas[0]
    body = {}
    for delta in cfg.noise_levels:
        obs = make_observation(problem, cfg, delta)
        sched = make_schedule(problem, cfg, alpha)
        stats = _ensemble(problem, obs, sched, cfg, projectors=proj)
        name = f"frequency_delta{_tag(delta)}"
        if "csv" in cfg.formats:
            io.write_columns_csv(out / f"{name}.csv", {"k": stats.k_grid, "e": stats.mean_error_sq,
                                                      "e_low": stats.freq_low_sq, "e_high": stats.freq_high_sq})
        epoch = problem.n + 1
        lo0, hi0 = float(stats.freq_low_sq[0]), float(stats.freq_high_sq[0])
        lo1 = float(np.interp(epoch, stats.k_grid, stats.freq_low_sq))
        hi1 = float(np.interp(epoch, stats.k_grid, stats.freq_high_sq))
        body[name] = {"delta": delta, "alpha": alpha, "L": cfg.truncation_level,
                      "low_ratio_after_epoch": lo1 / lo0 if lo0 > 0 else float("nan"),
                      "high_ratio_after_epoch": hi1 / hi0 if hi0 > 0 else float("nan"),
                      "total": _curve_summary(stats)}
        if "svg" in cfg.formats:
            from .plotting import line_chart
            line_chart(out / f"{name}.svg", [("e", stats.k_grid, stats.mean_error_sq),
                                             ("e_L", stats.k_grid, stats.freq_low_sq),
                                             ("e_H", stats.k_grid, stats.freq_high_sq)],
                       "k", "mean squared error", f"delta={delta}, L={cfg.truncation_level}")
    summary = {"command": "frequency-decay", "curves": body}
    _write_summary(out, cfg, summary)
    return summary


def min_error_trends(rows: list[dict], n_se: float = 2.0) -> dict:
    """Monotonicity of min error (nondecreasing) and argmin k (nonincreasing) along sorted delta.

    A step counts as consistent when it goes the right way or when the curve
    at the earlier location is within ``n_se`` standard errors of its minimum
    (the location of a flat minimum is itself noisy).
    """
    rows = sorted(rows, key=lambda r: r["delta"])
    err_ok, k_ok = True, True
    for a, b in zip(rows, rows[1:]):
        if b["min_error"] < a["min_error"] - n_se * math.hypot(a["se_at_min"], b["se_at_min"]):
            err_ok = False
        if b["argmin_k"] > a["argmin_k"] and not b.get("error_at_prev_argmin", math.inf) <= b["min_error"] + n_se * b["se_at_min"]:
            k_ok = False
    return {"min_error_nondecreasing": err_ok, "argmin_k_nonincreasing": k_ok}


def cmd_min_error_table(cfg: ExperimentConfig, out) -> dict:
    """(delta, min error, argmin k) per noise level, plus the monotone-trend verdicts."""
    out = _prepare_out(out)
    problem, _ = build_problem(cfg.problem)
    alpha = cfg.alphas[0]
    sched = make_schedule(problem, cfg, alpha)
    rows = []
    prev_k = None
    for delta in sorted(cfg.noise_levels):
        obs = make_observation(problem, cfg, delta)
        stats = _ensemble(problem, obs, sched, cfg)
        row = dict(_curve_summary(stats), delta=delta)
        if prev_k is not None:
            j = int(np.searchsorted(stats.k_grid, prev_k))
            j = min(j, stats.k_grid.size - 1)
            row["error_at_prev_argmin"] = float(stats.mean_error_sq[j])
        prev_k = row["argmin_k"]
        rows.append(row)
    trends = min_error_trends(rows)
    if "csv" in cfg.formats:
        io.write_columns_csv(out / "min_error_table.csv", {
            "delta": [r["delta"] for r in rows], "min_error": [r["min_error"] for r in rows],
            "argmin_k": np.array([r["argmin_k"] for r in rows], dtype=int),
            "se_at_min": [r["se_at_min"] for r in rows]})
    summary = {"command": "min-error-table", "problem": problem.name, "alpha": alpha, "rows": rows, "trends": trends}
    _write_summary(out, cfg, summary)
    return summary


def cmd_verify_bounds(cfg: ExperimentConfig, out, theorems=None) -> tuple[dict, int]:
    """Run the inequality suite; exit status 0 iff every report passes."""
    out = _prepare_out(out)
    labels = theorems if theorems is not None else cfg.theorems
    # schedule preconditions are routed to config errors before any evaluation
    problem, _ = build_problem(cfg.problem)
    for alpha in cfg.alphas:
        make_schedule(problem, cfg, alpha)
    suite = run_bound_suite(labels, seed=cfg.seed)
    table = {}
    status = 0
    for label in THEOREM_KEYS:
        if label not in suite:
            continue
        reports: list[BoundReport] = suite[label]
        ok = all(r.passed for r in reports)
        status = status if ok else 1
        table[label] = {"passed": ok, "n_reports": len(reports),
                        "failed": [i for i, r in enumerate(reports) if not r.passed]}
        slug = label.replace(".", "_")
        for i, rep in enumerate(reports):
            if "json" in cfg.formats:
                rep.to_json(out / f"bound_{slug}_{i:02d}.json")
            if "csv" in cfg.formats:
                rep.to_csv(out / f"bound_{slug}_{i:02d}.csv")
    summary = {"command": "verify-bounds", "theorems": table, "all_passed": status == 0}
    _write_summary(out, cfg, summary)
    return summary, status


def cmd_generate_problem(cfg: ExperimentConfig, out) -> dict:
    """Write the assembled problem (matrix CSV, JSON record) and one noisy observation per level."""
    out = _prepare_out(out)
    problem, _ = build_problem(cfg.problem)
    save_problem_json(problem, out / "problem.json")
    if "csv" in cfg.formats:
        write_matrix_csv(problem.a_matrix, out / "A.csv")
        io.write_columns_csv(out / "solution.csv", {"x_true": problem.x_true, "x_init": problem.x_init})
    observations = {}
    for delta in cfg.noise_levels:
        obs = make_observation(problem, cfg, delta)
        observations[repr(float(delta))] = obs.to_dict()
        if "csv" in cfg.formats:
            io.write_columns_csv(out / f"observation_delta{_tag(delta)}.csv",
                                 {"y_exact": problem.y_exact, "y_noisy": obs.y_noisy})
    sigma = problem.decomposition.sigma
    summary = {"command": "generate-problem", "name": problem.name, "n": problem.n, "m": problem.m,
               "rank": int(problem.decomposition.rank), "sigma_max": float(sigma[0]),
               "sigma_min": float(sigma[-1]), "max_row_norm_sq": problem.max_row_norm_sq,
               "observations": observations}
    _write_summary(out, cfg, summary)
    return summary
