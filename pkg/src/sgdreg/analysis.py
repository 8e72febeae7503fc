"""Monte Carlo ensembles, exact enumeration of the SGD law, error splits."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import io
from .model import FrequencyProjectors, LinearProblem, NoisyObservation
from .solvers import (
    INDEX_BLOCK,
    StepSchedule,
    Trajectory,
    _check_schedule,
    index_rng,
    resolve_grid,
    sgd_update,
)

ENUMERATION_LIMIT = 10**7


class _Moments:
    """Count/mean/M2 per grid point with Chan's pairwise merge.

    ``mean`` may carry a trailing vector axis; M2 then accumulates the squared
    Euclidean deviation (the trace of the covariance), or per-component
    squared deviations when ``componentwise``.
    """

    def __init__(self, componentwise: bool = False):
        self.count = 0
        self.mean = None
        self.m2 = None
        self.componentwise = componentwise

    def add_batch(self, samples: np.ndarray) -> None:
        # samples: (runs, K) or (runs, K, m)
        nb = samples.shape[0]
        mb = samples.mean(axis=0)
        dev = samples - mb
        axes = (0,) if self.componentwise else (0,) + tuple(range(2, samples.ndim))
        self.merge(nb, mb, np.sum(dev * dev, axis=axes))

    def merge(self, nb: int, mb: np.ndarray, m2b: np.ndarray) -> None:
        if self.count == 0:
            self.count, self.mean, self.m2 = nb, mb.copy(), m2b.copy()
            return
        na = self.count
        n = na + nb
        delta = mb - self.mean
        d2 = delta * delta if (delta.ndim == 1 or self.componentwise) else np.sum(delta * delta, axis=-1)
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2b + d2 * (na * nb / n)
        self.count = n

    def se(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.m2)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


@dataclass
class EnsembleStats:
    k_grid: np.ndarray
    mean_error_sq: np.ndarray
    se_error_sq: np.ndarray
    mean_residual_sq: np.ndarray
    se_residual_sq: np.ndarray
    n_runs: int
    mean_iterate: np.ndarray | None = None
    se_mean_iterate: np.ndarray | None = None
    variance_iterate: np.ndarray | None = None
    se_variance_iterate: np.ndarray | None = None
    freq_low_sq: np.ndarray | None = None
    freq_high_sq: np.ndarray | None = None
    se_freq_low_sq: np.ndarray | None = None
    se_freq_high_sq: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    CSV_COLUMNS = ("k", "mean_error_sq", "se_error_sq", "mean_residual_sq", "se_residual_sq",
                   "freq_low_sq", "freq_high_sq")

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "EnsembleStats":
        """Degenerate single-run ensemble (standard errors are zero)."""
        zeros = np.zeros(len(traj.k))
        fe = traj.freq_errors
        return cls(
            k_grid=traj.k.copy(), mean_error_sq=traj.errors_sq.copy(), se_error_sq=zeros.copy(),
            mean_residual_sq=traj.residuals_sq.copy(), se_residual_sq=zeros.copy(), n_runs=1,
            mean_iterate=None if traj.iterates is None else traj.iterates.copy(),
            variance_iterate=None if traj.iterates is None else zeros.copy(),
            freq_low_sq=None if fe is None else fe[:, 0].copy(),
            freq_high_sq=None if fe is None else fe[:, 1].copy(),
            meta=dict(traj.meta),
        )

    def to_columns(self) -> dict:
        nan = np.full(len(self.k_grid), np.nan)
        return {
            "k": self.k_grid,
            "mean_error_sq": self.mean_error_sq,
            "se_error_sq": self.se_error_sq,
            "mean_residual_sq": self.mean_residual_sq,
            "se_residual_sq": self.se_residual_sq,
            "freq_low_sq": nan if self.freq_low_sq is None else self.freq_low_sq,
            "freq_high_sq": nan if self.freq_high_sq is None else self.freq_high_sq,
        }

    def to_csv(self, path) -> None:
        io.write_columns_csv(path, self.to_columns())

    @classmethod
    def from_csv(cls, path, n_runs: int = 0) -> "EnsembleStats":
        c = io.read_columns_csv(path)
        opt = {name: (None if np.all(np.isnan(c[name])) else c[name]) for name in ("freq_low_sq", "freq_high_sq")}
        return cls(c["k"], c["mean_error_sq"], c["se_error_sq"], c["mean_residual_sq"], c["se_residual_sq"],
                   n_runs, **opt)

    def to_dict(self) -> dict:
        d = {name: val for name, val in self.to_columns().items()}
        d["n_runs"] = self.n_runs
        d["meta"] = self.meta
        if self.variance_iterate is not None:
            d["variance_iterate"] = self.variance_iterate
        return d

    def argmin_error(self) -> tuple[int, float]:
        j = int(np.argmin(self.mean_error_sq))
        return int(self.k_grid[j]), float(self.mean_error_sq[j])


def run_ensemble(
    problem: LinearProblem,
    observation: NoisyObservation,
    schedule: StepSchedule,
    k_max: int,
    n_runs: int,
    base_seed: int,
    *,
    grid=None,
    record_mean_iterate: bool = False,
    projectors: FrequencyProjectors | None = None,
    chunk_size: int = 512,
) -> EnsembleStats:
    """Average of ``n_runs`` independent SGD trajectories.

    Run ``r`` uses the index stream ``index_rng(base_seed, r)``, so it is
    bitwise identical to ``run_sgd(..., seed=base_seed, run=r)``. Runs are
    advanced together in chunks and reduced by an associative moment merge.
    """
    if n_runs < 2:
        raise ValueError("an ensemble needs n_runs >= 2")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    _check_schedule(problem, schedule)
    g = resolve_grid(grid, k_max)
    a, y, x_true = problem.a_matrix, observation.y_noisy, problem.x_true
    etas = schedule.etas(k_max)
    err_m, res_m = _Moments(), _Moments()
    it_m, comp_m, centred_m = _Moments(), _Moments(componentwise=True), _Moments()
    lo_m, hi_m = _Moments(), _Moments()
    exact_means = _exact_means_on_grid(problem, observation, etas, g) if record_mean_iterate else None

    for start in range(0, n_runs, chunk_size):
        runs = range(start, min(start + chunk_size, n_runs))
        rngs = [index_rng(base_seed, r) for r in runs]
        x = np.tile(problem.x_init, (len(rngs), 1))
        errs, ress, its, los, his = [], [], [], [], []

        def record(x):
            e = x - x_true
            errs.append(np.einsum("ij,ij->i", e, e))
            r = x @ a.T - y
            ress.append(np.einsum("ij,ij->i", r, r))
            if record_mean_iterate:
                its.append(x.copy())
            if projectors is not None:
                lo, hi = projectors.split_sq(e)
                los.append(lo)
                his.append(hi)

        gi = 0
        if g[0] == 1:
            record(x)
            gi = 1
        block = None
        for k in range(1, k_max + 1):
            pos = (k - 1) % INDEX_BLOCK
            if pos == 0:
                block = np.stack([rng.integers(0, problem.n, size=INDEX_BLOCK) for rng in rngs])
            i = block[:, pos]
            x = sgd_update(x, a[i], y[i], etas[k - 1])
            if gi < g.size and g[gi] == k + 1:
                record(x)
                gi += 1

        err_m.add_batch(np.stack(errs, axis=1))
        res_m.add_batch(np.stack(ress, axis=1))
        if record_mean_iterate:
            its_arr = np.stack(its, axis=1)  # (runs, K, m)
            it_m.add_batch(its_arr)
            comp_m.add_batch(its_arr)
            d = its_arr - exact_means[None]
            centred_m.add_batch(np.einsum("rkm,rkm->rk", d, d))
        if projectors is not None:
            lo_m.add_batch(np.stack(los, axis=1))
            hi_m.add_batch(np.stack(his, axis=1))

    stats = EnsembleStats(
        k_grid=g, mean_error_sq=err_m.mean, se_error_sq=err_m.se(),
        mean_residual_sq=res_m.mean, se_residual_sq=res_m.se(), n_runs=n_runs,
        meta={"base_seed": base_seed, "k_max": k_max, "n_runs": n_runs, "schedule": schedule.to_dict()},
    )
    if record_mean_iterate:
        stats.mean_iterate = it_m.mean
        stats.se_mean_iterate = comp_m.se()
        # unbiased sample variance, sum ||x - xbar||^2 / (N - 1)
        stats.variance_iterate = it_m.m2 / (n_runs - 1)
        # the spread of ||x - E x||^2 drives the fluctuation; the sample-mean
        # correction ||xbar - E x||^2 adds about sqrt(2) V / N on top
        stats.se_variance_iterate = np.hypot(centred_m.se(), np.sqrt(2) * stats.variance_iterate / n_runs)
    if projectors is not None:
        stats.freq_low_sq, stats.freq_high_sq = lo_m.mean, hi_m.mean
        stats.se_freq_low_sq, stats.se_freq_high_sq = lo_m.se(), hi_m.se()
    return stats


def _exact_means_on_grid(problem, observation, etas, grid) -> np.ndarray:
    # diagonal recursion in the right-singular basis: O(m) per step
    dec = problem.decomposition
    lam = dec.gram_eigenvalues
    v = dec.v
    rhs = v.T @ (problem.a_matrix.T @ observation.y_noisy / problem.n)
    mu = v.T @ problem.x_init
    out = np.empty((grid.size, problem.m))
    gi = 0
    for k in range(1, grid[-1] + 1):
        if grid[gi] == k:
            out[gi] = v @ mu
            gi += 1
            if gi == grid.size:
                break
        mu = mu - etas[k - 1] * (lam * mu - rhs)
    return out


@dataclass
class ExactDistribution:
    """Exact law of x_k over all index sequences (i_1, ..., i_{k-1})."""

    k: int
    probabilities: np.ndarray
    atoms: np.ndarray
    mean: np.ndarray = field(init=False)
    variance: np.ndarray = field(init=False)

    def __post_init__(self):
        p = self.probabilities
        self.mean = p @ self.atoms
        d = self.atoms - self.mean
        self.variance = float(p @ np.einsum("ij,ij->i", d, d))

    @property
    def second_moment_trace(self) -> float:
        """E||x_k - E x_k||^2."""
        return self.variance

    def expect(self, values: np.ndarray) -> float:
        return float(self.probabilities @ values)

    def mean_error_sq(self, x_true) -> float:
        e = self.atoms - x_true
        return self.expect(np.einsum("ij,ij->i", e, e))

    def mean_residual_sq(self, a_matrix, y) -> float:
        r = self.atoms @ np.asarray(a_matrix).T - y
        return self.expect(np.einsum("ij,ij->i", r, r))

    def weighted_variance(self, weight: np.ndarray) -> float:
        """E||W (x_k - E x_k)||^2 for a matrix W (e.g. a power of B)."""
        d = (self.atoms - self.mean) @ np.asarray(weight).T
        return self.expect(np.einsum("ij,ij->i", d, d))

    def distinct_atoms(self, decimals: int = 12) -> np.ndarray:
        return np.unique(np.round(self.atoms, decimals), axis=0)


def _enumeration_guard(n: int, k: int) -> None:
    # the law of x_k has n^(k-1) atoms
    if n ** (k - 1) > ENUMERATION_LIMIT:
        raise ValueError(f"enumerating {n}^{k - 1} index sequences exceeds the limit {ENUMERATION_LIMIT}")


def exact_laws(
    problem: LinearProblem, observation: NoisyObservation, schedule: StepSchedule, k_max: int
) -> list[ExactDistribution]:
    """Exact laws of x_1, ..., x_{k_max}; level k+1 branches every atom of level k n ways."""
    n = problem.n
    _enumeration_guard(n, k_max)
    _check_schedule(problem, schedule)
    a, y = problem.a_matrix, observation.y_noisy
    x = problem.x_init[None, :].copy()
    laws = [ExactDistribution(1, np.ones(1), x.copy())]
    for k in range(1, k_max):
        idx = np.tile(np.arange(n), x.shape[0])
        x = sgd_update(np.repeat(x, n, axis=0), a[idx], y[idx], schedule.eta(k))
        laws.append(ExactDistribution(k + 1, np.full(x.shape[0], float(n) ** -k), x.copy()))
    return laws


def brute_force_law(
    problem: LinearProblem, observation: NoisyObservation, schedule: StepSchedule, k: int
) -> ExactDistribution:
    """Exact law of x_k by replaying every index sequence of length k-1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    _enumeration_guard(problem.n, k)
    _check_schedule(problem, schedule)
    a, y = problem.a_matrix, observation.y_noisy
    seqs = np.array(list(itertools.product(range(problem.n), repeat=k - 1)), dtype=int).reshape(problem.n ** (k - 1), k - 1)
    x = np.tile(problem.x_init, (seqs.shape[0], 1))
    for j in range(k - 1):
        i = seqs[:, j]
        x = sgd_update(x, a[i], y[i], schedule.eta(j + 1))
    return ExactDistribution(k, np.full(seqs.shape[0], 1.0 / seqs.shape[0]), x)


def bias_variance_decompose(obj, x_true):
    """Split mean squared error into ||E x - x_true||^2 and E||x - E x||^2.

    Works on an exact law (scalars), on ensemble statistics recorded with
    ``record_mean_iterate`` (arrays over the grid), and on a deterministic
    trajectory with iterates (variance identically zero).
    """
    x_true = np.asarray(x_true, dtype=float)
    if isinstance(obj, ExactDistribution):
        d = obj.mean - x_true
        return float(d @ d), obj.variance
    if isinstance(obj, EnsembleStats):
        if obj.mean_iterate is None or obj.variance_iterate is None:
            raise ValueError("ensemble was run without record_mean_iterate")
        d = obj.mean_iterate - x_true
        return np.einsum("ij,ij->i", d, d), obj.variance_iterate.copy()
    if isinstance(obj, Trajectory):
        if obj.iterates is None:
            raise ValueError("trajectory has no recorded iterates")
        d = obj.iterates - x_true
        return np.einsum("ij,ij->i", d, d), np.zeros(len(obj.k))
    raise TypeError(f"cannot decompose {type(obj).__name__}")


def frequency_errors(obj, projectors: FrequencyProjectors, x_true=None):
    """Per-k squared norms (low, high) of the error split by the projectors."""
    if isinstance(obj, EnsembleStats):
        if obj.freq_low_sq is None:
            raise ValueError("ensemble was run without projectors")
        return obj.freq_low_sq, obj.freq_high_sq
    if isinstance(obj, Trajectory):
        if obj.iterates is not None:
            return projectors.split_sq(obj.iterates - x_true)
        if obj.freq_errors is not None:
            return obj.freq_errors[:, 0], obj.freq_errors[:, 1]
        raise ValueError("trajectory has neither iterates nor frequency errors")
    if isinstance(obj, ExactDistribution):
        lo, hi = projectors.split_sq(obj.atoms - x_true)
        return obj.expect(lo), obj.expect(hi)
    arr = np.asarray(obj, dtype=float)
    if x_true is not None:
        arr = arr - x_true
    return projectors.split_sq(arr)
