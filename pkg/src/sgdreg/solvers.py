"""SGD and Landweber iterations, exact mean recursion, a-priori stopping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .model import FrequencyProjectors, LinearProblem, NoisyObservation

# indices are always drawn from a run's generator in blocks of this size, so a
# single run and the same run inside a vectorized ensemble see identical streams
INDEX_BLOCK = 1024

# slack for floating-point roundoff in c0 * max_i ||a_i||^2 <= 1
_SCHEDULE_RTOL = 1e-12


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes eta_j = c0 * j**-alpha."""

    c0: float
    alpha: float
    max_row_norm_sq: float

    def __post_init__(self):
        if not self.c0 > 0:
            raise ScheduleError(f"c0 must be positive, got {self.c0}")
        if not 0 <= self.alpha < 1:
            raise ScheduleError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.max_row_norm_sq > 0:
            raise ScheduleError("max_row_norm_sq must be positive")
        if self.c0 * self.max_row_norm_sq > 1 + _SCHEDULE_RTOL:
            raise ScheduleError(
                f"c0 * max_i ||a_i||^2 = {self.c0 * self.max_row_norm_sq:.6g} exceeds 1"
            )

    @classmethod
    def for_problem(cls, problem: LinearProblem, alpha: float, c0: float | None = None) -> "StepSchedule":
        """Schedule with ``c0 = 1 / max_i ||a_i||^2`` unless given explicitly."""
        mr = problem.max_row_norm_sq
        return cls(1.0 / mr if c0 is None else float(c0), float(alpha), mr)

    @property
    def outside_theory(self) -> bool:
        # constant steps are not covered by the consistency result
        return self.alpha == 0

    def eta(self, j: int) -> float:
        return self.c0 * float(j) ** (-self.alpha)

    def etas(self, k: int) -> np.ndarray:
        """Array [eta_1, ..., eta_k]."""
        return self.c0 * np.arange(1, k + 1, dtype=float) ** (-self.alpha)

    def to_dict(self) -> dict:
        return {"c0": self.c0, "alpha": self.alpha, "max_row_norm_sq": self.max_row_norm_sq,
                "outside_theory": self.outside_theory}


@dataclass
class Trajectory:
    """Per-iteration statistics of one run; ``k[t]`` is the iterate index."""

    k: np.ndarray
    errors_sq: np.ndarray
    residuals_sq: np.ndarray
    iterates: np.ndarray | None = None
    freq_errors: np.ndarray | None = None
    indices: np.ndarray | None = None
    index_stream_seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.errors_sq) != len(self.k) or len(self.residuals_sq) != len(self.k):
            raise ValueError("trajectory columns must have equal length")

    @property
    def final_iterate(self) -> np.ndarray | None:
        return None if self.iterates is None else self.iterates[-1]

    def to_csv(self, path, sidecar: bool = True) -> None:
        """Columns k, error_sq, residual_sq, err_low_sq, err_high_sq; metadata in ``<path>.json``."""
        nan = np.full(len(self.k), np.nan)
        fe = self.freq_errors
        io.write_columns_csv(path, {
            "k": self.k, "error_sq": self.errors_sq, "residual_sq": self.residuals_sq,
            "err_low_sq": nan if fe is None else fe[:, 0], "err_high_sq": nan if fe is None else fe[:, 1],
        })
        if sidecar:
            io.write_json(f"{path}.json", dict(self.meta, index_stream_seed=self.index_stream_seed))


def index_rng(seed: int, run: int = 0) -> np.random.Generator:
    """Generator for the index stream of run ``run`` under base seed ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(run)]))


def draw_indices(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    """First ``count`` uniform row indices of a stream (drawn in whole blocks)."""
    blocks = -(-count // INDEX_BLOCK)
    out = np.concatenate([rng.integers(0, n, size=INDEX_BLOCK) for _ in range(blocks)]) if blocks else np.empty(0, int)
    return out[:count]


def thinned_grid(k_last: int, per_decade: int = 20, n_uniform: int = 50) -> np.ndarray:
    """Checkpoints 1, 2, 4, 8, ... plus geometric and uniform points up to k_last."""
    pts = {1, int(k_last)}
    p = 1
    while p <= k_last:
        pts.add(p)
        p *= 2
    if k_last > 1:
        n_geo = max(2, int(math.ceil(per_decade * math.log10(k_last))) + 1)
        pts.update(np.unique(np.round(np.geomspace(1, k_last, n_geo)).astype(int)).tolist())
        pts.update(np.unique(np.round(np.linspace(1, k_last, n_uniform)).astype(int)).tolist())
    return np.array(sorted(pts), dtype=int)


def resolve_grid(grid, k_max: int) -> np.ndarray:
    """Recording grid over iterate indices 1..k_max+1."""
    k_last = k_max + 1
    if grid is None or (isinstance(grid, str) and grid == "all"):
        return np.arange(1, k_last + 1)
    if isinstance(grid, str) and grid == "log":
        return thinned_grid(k_last)
    g = np.unique(np.asarray(grid, dtype=int))
    if g.size == 0 or g[0] < 1 or g[-1] > k_last:
        raise ValueError(f"recording grid must lie within [1, {k_last}]")
    return g


def sgd_update(x, rows, targets, eta):
    """x - eta ((a, x) - y) a, broadcasting over leading axes of ``x``/``rows``.

    The single implementation of the row update; the solver, the Monte Carlo
    ensemble and the enumeration oracle all route through it.
    """
    resid = np.einsum("...j,...j->...", rows, x) - targets
    return x - (np.asarray(eta) * resid)[..., None] * rows


def sgd_step(x, row_index: int, problem: LinearProblem, y, eta: float) -> np.ndarray:
    """One SGD update with row ``row_index`` (1-based)."""
    if not 1 <= row_index <= problem.n:
        raise IndexError(f"row index {row_index} outside 1..{problem.n}")
    if not eta > 0:
        raise ValueError("step size must be positive")
    i = row_index - 1
    return sgd_update(np.asarray(x, dtype=float), problem.a_matrix[i], float(np.asarray(y)[i]), eta)


def _check_schedule(problem: LinearProblem, schedule: StepSchedule) -> None:
    if schedule.c0 * problem.max_row_norm_sq > 1 + _SCHEDULE_RTOL:
        raise ScheduleError(
            f"schedule violates c0 max||a_i||^2 <= 1 for this problem "
            f"({schedule.c0 * problem.max_row_norm_sq:.6g})"
        )


class _Recorder:
    def __init__(self, problem, y, grid, record_iterates, projectors):
        self.problem, self.y, self.grid = problem, y, grid
        self.errors, self.resids, self.iters, self.freq = [], [], [], []
        self.record_iterates, self.projectors = record_iterates, projectors
        self._next = 0

    def wants(self, k: int) -> bool:
        return self._next < self.grid.size and self.grid[self._next] == k

    def record(self, x):
        e = x - self.problem.x_true
        r = self.problem.a_matrix @ x - self.y
        self.errors.append(float(e @ e))
        self.resids.append(float(r @ r))
        if self.record_iterates:
            self.iters.append(x.copy())
        if self.projectors is not None:
            lo, hi = self.projectors.split_sq(e)
            self.freq.append((float(lo), float(hi)))
        self._next += 1

    def build(self, **kw) -> Trajectory:
        return Trajectory(
            k=self.grid.copy(),
            errors_sq=np.array(self.errors),
            residuals_sq=np.array(self.resids),
            iterates=np.array(self.iters) if self.record_iterates else None,
            freq_errors=np.array(self.freq) if self.projectors is not None else None,
            **kw,
        )


def run_sgd(
    problem: LinearProblem,
    observation: NoisyObservation,
    schedule: StepSchedule,
    k_max: int,
    seed: int,
    *,
    run: int = 0,
    grid=None,
    record_iterates: bool = False,
    record_indices: bool = False,
    projectors: FrequencyProjectors | None = None,
) -> Trajectory:
    """Run ``k_max`` SGD steps from ``x_init``; statistics recorded on ``grid``.

    Iterate x_k is recorded at k in the grid (default: every k = 1..k_max+1).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    _check_schedule(problem, schedule)
    g = resolve_grid(grid, k_max)
    a, y = problem.a_matrix, observation.y_noisy
    idx = draw_indices(index_rng(seed, run), problem.n, k_max)
    etas = schedule.etas(k_max)
    rec = _Recorder(problem, y, g, record_iterates, projectors)
    x = problem.x_init.copy()
    if rec.wants(1):
        rec.record(x)
    for k in range(1, k_max + 1):
        i = idx[k - 1]
        x = sgd_update(x, a[i], y[i], etas[k - 1])
        if rec.wants(k + 1):
            rec.record(x)
    meta = {"k_max": k_max, "seed": seed, "run": run, "schedule": schedule.to_dict()}
    return rec.build(indices=idx + 1 if record_indices else None, index_stream_seed=seed, meta=meta)


def run_landweber(
    problem: LinearProblem,
    observation: NoisyObservation,
    schedule: StepSchedule,
    k_max: int,
    *,
    grid=None,
    record_iterates: bool = False,
    projectors: FrequencyProjectors | None = None,
) -> Trajectory:
    """x_{k+1} = x_k - eta_k n^{-1} A^T (A x_k - y)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    _check_schedule(problem, schedule)
    g = resolve_grid(grid, k_max)
    a, y, n = problem.a_matrix, observation.y_noisy, problem.n
    etas = schedule.etas(k_max)
    rec = _Recorder(problem, y, g, record_iterates, projectors)
    x = problem.x_init.copy()
    if rec.wants(1):
        rec.record(x)
    for k in range(1, k_max + 1):
        x = x - etas[k - 1] / n * (a.T @ (a @ x - y))
        if rec.wants(k + 1):
            rec.record(x)
    meta = {"k_max": k_max, "schedule": schedule.to_dict(), "method": "landweber"}
    return rec.build(meta=meta)


def exact_mean_recursion(
    problem: LinearProblem, observation: NoisyObservation, schedule: StepSchedule, k_max: int
) -> np.ndarray:
    """Exact E[x_k], k = 1..k_max+1, as rows of a (k_max+1, m) array.

    E[x_{k+1}] = E[x_k] - eta_k (B E[x_k] - n^{-1} A^T y).
    """
    _check_schedule(problem, schedule)
    b = problem.gram
    aty = problem.a_matrix.T @ observation.y_noisy / problem.n
    etas = schedule.etas(k_max)
    out = np.empty((k_max + 1, problem.m))
    x = problem.x_init.copy()
    out[0] = x
    for k in range(k_max):
        x = x - etas[k] * (b @ x - aty)
        out[k + 1] = x
    return out


def balancing_exponent(alpha: float, p: float = 0.5) -> float:
    """theta solving min(2a, min(1, 2p)(1-a)) theta = 2 - (1-a) theta."""
    rate = min(2 * alpha, min(1.0, 2 * p) * (1 - alpha))
    return 2.0 / (rate + 1.0 - alpha)


def a_priori_stopping_index(
    delta: float, alpha: float, rate_exponent: float | None = None, scale: float = 1.0, p: float | None = None
) -> int:
    """k(delta) = max(1, ceil(scale * delta**-theta)).

    With ``rate_exponent`` unset, theta balances the decaying and the
    noise-driven terms of the mean-squared-error estimate (p defaults to 1/2).
    """
    if not delta > 0:
        raise ValueError("noise level must be positive")
    if not scale > 0:
        raise ValueError("scale must be positive")
    theta = balancing_exponent(alpha, 0.5 if p is None else p) if rate_exponent is None else rate_exponent
    upper = 2.0 / (1.0 - alpha)
    if not 0 < theta < upper:
        raise ValueError(f"theta = {theta} outside the consistency range (0, {upper})")
    return max(1, int(math.ceil(scale * delta ** (-theta))))
