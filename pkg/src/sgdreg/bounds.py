"""Closed-form error bounds for SGD on linear systems and exact checks of them.

Every checker returns a :class:`BoundReport` comparing an exactly computed
left-hand side against the bound on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import io
from .analysis import exact_laws
from .model import (
    FrequencyProjectors,
    LinearProblem,
    NoisyObservation,
    SourceConfig,
    add_scaled_noise,
    build_synthetic_problem,
    build_toy_problem,
    psd_power,
    random_orthonormal,
    spectral_split,
)
from .solvers import StepSchedule, exact_mean_recursion, sgd_update

MARGIN_RTOL = 1e-10
# slack on step-size preconditions (eta <= 1/||B||, eta <= c0)
_STEP_RTOL = 1e-12


@dataclass
class BoundReport:
    """lhs vs rhs on a grid; ``sense`` is "<=" (upper bound) or ">=" (lower bound)."""

    name: str
    k_grid: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    params: dict = field(default_factory=dict)
    sense: str = "<="
    conditions: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.k_grid = np.asarray(self.k_grid)
        self.lhs = np.asarray(self.lhs, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.sense not in ("<=", ">="):
            raise ValueError(f"unknown sense {self.sense!r}")
        if not (self.k_grid.shape == self.lhs.shape == self.rhs.shape):
            raise ValueError("k_grid, lhs and rhs must have the same shape")

    @property
    def margin(self) -> np.ndarray:
        return self.rhs - self.lhs if self.sense == "<=" else self.lhs - self.rhs

    @property
    def tol(self) -> float:
        top = float(np.max(np.abs(self.rhs))) if self.rhs.size else 0.0
        return MARGIN_RTOL * max(1.0, top)

    @property
    def margin_ok(self) -> bool:
        return bool(self.margin.size == 0 or np.min(self.margin) >= -self.tol)

    @property
    def passed(self) -> bool:
        return self.margin_ok and all(bool(v) for v in self.conditions.values())

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margin)) if self.margin.size else float("inf")

    @property
    def n_violations(self) -> int:
        return int(np.sum(self.margin < -self.tol))

    def to_dict(self) -> dict:
        return {
            "name": self.name, "sense": self.sense, "passed": self.passed,
            "min_margin": self.min_margin, "n_violations": self.n_violations,
            "k_grid": self.k_grid, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin,
            "params": self.params, "conditions": self.conditions, "notes": self.notes,
        }

    def to_json(self, path) -> None:
        io.write_json(path, self.to_dict())

    def to_csv(self, path) -> None:
        io.write_columns_csv(path, {"k": self.k_grid, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin})

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = "" if not self.conditions else " " + " ".join(f"{k}={bool(v)}" for k, v in self.conditions.items())
        return (f"{status} {self.name}: {self.lhs.size} points, min margin {self.min_margin:.3e}, "
                f"{self.n_violations} violations{extra}")


# --- special functions and schedule sums ----------------------------------

def beta_function(a: float, b: float) -> float:
    """B(a, b) = Gamma(a) Gamma(b) / Gamma(a + b) via log-gamma."""
    if not (a > 0 and b > 0):
        raise ValueError("Beta function needs positive arguments")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def _pow0(x: float, p: float) -> float:
    # x**p with 0**0 = 1
    return 1.0 if p == 0 else x**p


def _etas(schedule_or_etas, k: int) -> np.ndarray:
    if isinstance(schedule_or_etas, StepSchedule):
        return schedule_or_etas.etas(k)
    arr = np.asarray(schedule_or_etas, dtype=float)
    if arr.size < k:
        raise ValueError(f"need at least {k} step sizes, got {arr.size}")
    return arr[:k]


def _eigenvalues(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        lam = b
    else:
        lam = np.linalg.eigvalsh(0.5 * (b + b.T))
    return np.clip(lam, 0.0, None)


def pi_product_norm(b, schedule, j: int, k: int, p: float = 0.0) -> float:
    """||prod_{i=j}^k (I - eta_i B) B^p|| evaluated on the spectrum of B.

    ``b`` is a symmetric PSD matrix or its eigenvalues; ``schedule`` a
    StepSchedule or the array [eta_1, eta_2, ...]. j = k+1 is the empty product.
    """
    if p < 0:
        raise ValueError("power must be nonnegative")
    if j < 1 or j > k + 1:
        raise ValueError(f"need 1 <= j <= k+1, got j={j}, k={k}")
    lam = _eigenvalues(b)
    etas = _etas(schedule, k)[j - 1:k]
    bnorm = float(lam.max()) if lam.size else 0.0
    if etas.size and bnorm > 0 and etas.max() * bnorm > 1 + _STEP_RTOL:
        raise ValueError(f"step size {etas.max():.6g} exceeds 1/||B|| = {1 / bnorm:.6g}")
    factors = np.prod(1.0 - np.outer(etas, lam), axis=0) if etas.size else np.ones_like(lam)
    return float(np.max(np.abs(factors) * psd_power(lam, p))) if lam.size else 0.0


def _pi_norms_all(lam: np.ndarray, etas: np.ndarray, k: int, p: float) -> np.ndarray:
    """out[j-1] = ||Pi_{j+1}^k(B) B^p|| for j = 1..k."""
    f = 1.0 - np.outer(etas[:k], lam)  # row i-1 holds 1 - eta_i lam
    tail = np.ones((k + 1, lam.size))
    for i in range(k - 1, -1, -1):
        tail[i] = tail[i + 1] * f[i]
    # Pi_{j+1}^k = product of rows j..k-1 = tail[j]
    return np.max(np.abs(tail[1:k + 1]) * psd_power(lam, p), axis=1)


def kernel_bound(p: float, step_sum: float) -> float:
    """p^p / (e^p (sum eta)^p); equals 1 at p = 0."""
    if p == 0:
        return 1.0
    return (p / (math.e * step_sum)) ** p


# --- approximation and propagation errors ---------------------------------

def approximation_constant(p: float, s: float, alpha: float, c0: float, w_norm: float) -> float:
    q = p + s
    if q < 0:
        raise ValueError("p + s must be nonnegative")
    return _pow0(q * (1 - alpha) / (c0 * math.e * (2 ** (1 - alpha) - 1)), q) * w_norm


def approximation_bound(p: float, s: float, alpha: float, c0: float, w_norm: float, k):
    """c_{p,s} k^{-(p+s)(1-alpha)} bounding ||B^s E[e_{k+1}]|| for exact data."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("k must be >= 1")
    return approximation_constant(p, s, alpha, c0, w_norm) * k ** (-(p + s) * (1 - alpha))


def propagation_constant(r: float, alpha: float, c0: float) -> float:
    rr = _pow0(r / math.e, r)
    if r < 1:
        return c0 ** (1 - r) * (rr * beta_function(1 - alpha, 1 - r) + 1)
    return rr * 2**alpha * (2 - alpha) / (1 - alpha) + 1


def propagation_bound(s: float, alpha: float, c0: float, delta_bar: float, k):
    """Bound on ||B^s E[x_{k+1} - x_{k+1}^delta]|| for s in [-1/2, 1/2]."""
    if not -0.5 <= s <= 0.5:
        raise ValueError("s must lie in [-1/2, 1/2]")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    r = 0.5 + s
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("k must be >= 1")
    c = propagation_constant(r, alpha, c0)
    growth = k ** ((1 - r) * (1 - alpha)) if r < 1 else np.maximum(1.0, np.log(k))
    return c * delta_bar * growth


def variance_bound_rhs(problem: LinearProblem, observation, schedule, s: float, k: int, residual_sequence) -> float:
    """sum_{j=1}^k eta_j^2 ||B^{s+1/2} Pi_{j+1}^k(B)||^2 r_j, r_j = E||A x_j - y||^2."""
    if k == 0:
        return 0.0
    r = np.asarray(residual_sequence, dtype=float)
    if r.size < k:
        raise ValueError(f"residual sequence has {r.size} entries, need {k}")
    lam = problem.decomposition.gram_eigenvalues
    etas = _etas(schedule, k)
    norms = _pi_norms_all(lam, etas, k, s + 0.5)
    return float(np.sum(etas**2 * norms**2 * r[:k]))


# --- residual and total error ---------------------------------------------

def residual_exponent(alpha: float, p: float) -> float:
    return min(alpha, min(1.0, 2 * p) * (1 - alpha))


def total_error_exponent(alpha: float, p: float) -> float:
    return min(2 * alpha, min(1.0, 2 * p) * (1 - alpha))


def variance_exponent(alpha: float, p: float) -> float:
    return min(1 - alpha, alpha + 2 * p * (1 - alpha), 2 * alpha)


@dataclass(frozen=True)
class TracedConstants:
    """Inputs of the constant chain behind the residual and total-error bounds."""

    alpha: float
    p: float
    c0: float
    a_norm: float
    w_norm: float
    r1: float  # ||A x_1 - y^delta||^2

    @classmethod
    def for_problem(cls, problem: LinearProblem, observation: NoisyObservation, schedule: StepSchedule,
                    source: SourceConfig) -> "TracedConstants":
        r = problem.a_matrix @ problem.x_init - observation.y_noisy
        return cls(schedule.alpha, source.p, schedule.c0, problem.operator_norm, source.w_norm, float(r @ r))

    @property
    def c1(self) -> float:
        return self.a_norm**2 / math.e

    @property
    def c2(self) -> float:
        return self.c0 * self.a_norm**2

    @property
    def c_p(self) -> float:
        return approximation_constant(self.p, 0.0, self.alpha, self.c0, self.w_norm) ** 2 * self.a_norm**2

    @property
    def c_alpha(self) -> float:
        a = self.alpha
        return (2**a * (2 - a) / (math.e * (1 - a)) + 1) ** 2

    @property
    def c3(self) -> float:
        return 4 * self.c_p

    @property
    def c4(self) -> float:
        return 4 * self.c_alpha + 2


def _weighted_history(etas: np.ndarray, k: int, values: np.ndarray) -> float:
    # sum_{j=1}^{k-1} eta_j^2 / (sum_{i=j+1}^k eta_i) * values_j
    if k < 2:
        return 0.0
    csum = np.cumsum(etas[:k])
    tail = csum[k - 1] - csum[: k - 1]
    return float(np.sum(etas[: k - 1] ** 2 / tail * values[: k - 1]))


def traced_residual_majorant(consts: TracedConstants, delta: float, k_max: int) -> np.ndarray:
    """R_1 = ||Ax_1 - y||^2 and R_{k+1} = c1 sum_{j<k} eta_j^2/(sum_{i=j+1}^k eta_i) R_j
    + c2 k^{-2 alpha} R_k + c3 k^{-2p(1-alpha)} + c4 delta^2 max(1, ln k)^2.

    Every coefficient is nonnegative, so by induction R_k bounds the mean
    squared residual r_k for all k. Returns R_1..R_{k_max+1}.
    """
    a = consts.alpha
    etas = consts.c0 * np.arange(1, k_max + 1, dtype=float) ** (-a)
    out = np.empty(k_max + 1)
    out[0] = consts.r1
    c1, c2, c3, c4 = consts.c1, consts.c2, consts.c3, consts.c4
    for k in range(1, k_max + 1):
        out[k] = (c1 * _weighted_history(etas, k, out) + c2 * k ** (-2 * a) * out[k - 1]
                  + c3 * k ** (-2 * consts.p * (1 - a)) + c4 * delta**2 * max(1.0, math.log(k)) ** 2)
    return out


def traced_variance_majorant(consts: TracedConstants, residual_majorant: np.ndarray, k_max: int) -> np.ndarray:
    """V_{k+1} = (2e)^{-1} sum_{j<k} eta_j^2/(sum eta) R_j + c0 k^{-2 alpha} R_k, V_1 = 0."""
    a = consts.alpha
    etas = consts.c0 * np.arange(1, k_max + 1, dtype=float) ** (-a)
    out = np.zeros(k_max + 1)
    for k in range(1, k_max + 1):
        out[k] = (_weighted_history(etas, k, residual_majorant) / (2 * math.e)
                  + consts.c0 * k ** (-2 * a) * residual_majorant[k - 1])
    return out


def _fitted_value(basis: np.ndarray, constants) -> np.ndarray:
    c = np.asarray(constants, dtype=float)
    if c.shape != (basis.shape[0],):
        raise ValueError(f"expected {basis.shape[0]} constants, got {c.size}")
    return c @ basis


def residual_basis(alpha: float, p: float, k, delta: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    rho = residual_exponent(alpha, p)
    return np.stack([k ** (-rho) * np.log(k), delta**2 * np.maximum(1.0, np.log(k)) ** 2])


def total_error_basis(alpha: float, p: float, k, delta: float, delta_bar: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    rho = total_error_exponent(alpha, p)
    return np.stack([k ** (-rho) * np.log(k) ** 2, k ** (1 - alpha) * delta_bar**2, np.full(k.shape, delta**2)])


def variance_basis(alpha: float, p: float, k, delta: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    rho = variance_exponent(alpha, p)
    return np.stack([k ** (-rho) * np.log(k) ** 2, np.full(k.shape, delta**2)])


def residual_bound(alpha: float, p: float, k, delta: float, constants_mode: str = "traced", *,
                   traced: TracedConstants | None = None, constants=None):
    """Bound on E||A x_{k+1} - y^delta||^2.

    traced: the majorant of :func:`traced_residual_majorant` at k+1 (needs ``traced``).
    fitted: c k^{-rho} ln k + c' delta^2 max(1, ln k)^2 with ``constants`` = (c, c'),
    rho = min(alpha, min(1, 2p)(1 - alpha)).
    """
    k_arr = np.asarray(k)
    if np.any(k_arr < 2):
        raise ValueError("k must be >= 2")
    if constants_mode == "traced":
        if traced is None:
            raise ValueError("traced mode needs TracedConstants")
        maj = traced_residual_majorant(traced, delta, int(np.max(k_arr)))
        return maj[k_arr]
    if constants_mode == "fitted":
        if constants is None:
            raise ValueError("fitted mode needs constants (c, c')")
        return _fitted_value(residual_basis(alpha, p, k_arr, delta), constants)
    raise ValueError(f"unknown constants mode {constants_mode!r}")


def total_error_bound(alpha: float, p: float, k, delta: float, delta_bar: float, constants_mode: str = "traced", *,
                      traced: TracedConstants | None = None, constants=None):
    """Bound on E||x_{k+1}^delta - x_true||^2.

    traced: variance majorant + 2 c_{p,0}^2 k^{-2p(1-alpha)} + 2 c_{1/2,alpha}^2 k^{1-alpha} delta_bar^2.
    fitted: c k^{-rho} ln^2 k + c' k^{1-alpha} delta_bar^2 + c'' delta^2,
    rho = min(2 alpha, min(1, 2p)(1 - alpha)).
    """
    k_arr = np.asarray(k)
    if np.any(k_arr < 2):
        raise ValueError("k must be >= 2")
    if constants_mode == "traced":
        if traced is None:
            raise ValueError("traced mode needs TracedConstants")
        kmax = int(np.max(k_arr))
        res = traced_residual_majorant(traced, delta, kmax)
        var = traced_variance_majorant(traced, res, kmax)[k_arr]
        kf = k_arr.astype(float)
        a = traced.alpha
        bias = (2 * approximation_constant(traced.p, 0.0, a, traced.c0, traced.w_norm) ** 2 * kf ** (-2 * traced.p * (1 - a))
                + 2 * propagation_constant(0.5, a, traced.c0) ** 2 * kf ** (1 - a) * delta_bar**2)
        return var + bias
    if constants_mode == "fitted":
        if constants is None:
            raise ValueError("fitted mode needs constants (c, c', c'')")
        return _fitted_value(total_error_basis(alpha, p, k_arr, delta, delta_bar), constants)
    raise ValueError(f"unknown constants mode {constants_mode!r}")


def balanced_iteration(alpha: float, p: float, delta_bar: float, scale: float = 1.0) -> int:
    """k* with k^{-rho} = k^{1-alpha} delta_bar^2, i.e. ceil(scale delta_bar^{-2/(rho+1-alpha)})."""
    if not delta_bar > 0:
        raise ValueError("noise level must be positive")
    rho = total_error_exponent(alpha, p)
    return max(1, int(math.ceil(scale * delta_bar ** (-2.0 / (rho + 1 - alpha)))))


@dataclass
class EnvelopeFit:
    constants: np.ndarray
    burn_in: np.ndarray
    validation: np.ndarray


def fit_envelope(k, values, basis: np.ndarray, burn_in_fraction: float = 0.5) -> EnvelopeFit:
    """Smallest nonnegative constants whose combination of ``basis`` rows dominates
    ``values`` on the burn-in part of the grid (a linear program).

    The objective is the envelope summed over the burn-in range, so the fit
    is tight there; the remaining grid points are left for validation.
    """
    k = np.asarray(k)
    values = np.asarray(values, dtype=float)
    n_burn = max(1, int(math.floor(burn_in_fraction * k.size)))
    burn = np.arange(n_burn)
    val = np.arange(n_burn, k.size)
    phi = basis[:, burn]
    active = np.any(phi > 0, axis=1)
    c = np.zeros(basis.shape[0])
    if np.any(active):
        scale = np.max(phi[active], axis=1)
        a_ub = -(phi[active] / scale[:, None]).T
        res = linprog(np.sum(phi[active] / scale[:, None], axis=1), A_ub=a_ub, b_ub=-values[burn],
                      bounds=[(0, None)] * int(active.sum()), method="highs")
        if not res.success:
            raise RuntimeError(f"envelope fit failed: {res.message}")
        c[active] = res.x / scale
        # guard against solver roundoff on the active constraints
        c *= max(1.0, float(np.max(values[burn] / np.maximum(c @ phi, 1e-300))))
    elif np.any(values[burn] > 0):
        raise ValueError("basis vanishes on the burn-in range but the data do not")
    return EnvelopeFit(c, k[burn], k[val])


def check_fitted_envelope(name: str, k, lhs, basis: np.ndarray, params: dict, burn_in_fraction: float = 0.5) -> BoundReport:
    """Fit constants on the burn-in range; pass iff the envelope still dominates on validation."""
    fit = fit_envelope(k, lhs, basis, burn_in_fraction)
    rhs = fit.constants @ basis
    rep = BoundReport(name, np.asarray(k), lhs, rhs, dict(params, constants=fit.constants.tolist(),
                                                         burn_in=[int(fit.burn_in[0]), int(fit.burn_in[-1])]))
    return rep


# --- preasymptotic one-step inequalities ----------------------------------

def _check_step(eta: float, c0: float) -> None:
    if not eta > 0:
        raise ValueError("step size must be positive")
    if eta > c0 * (1 + _STEP_RTOL):
        raise ValueError(f"step size {eta} exceeds c0 = {c0}")


def weak_preasymptotic_step(low_norm: float, high_norm: float, sigma_l: float, sigma_lp1: float,
                            eta: float, c0: float, delta_bar: float) -> tuple[float, float]:
    """Right-hand sides for ||E P_L e_{k+1}|| and ||E P_H e_{k+1}|| given the current mean norms."""
    _check_step(eta, c0)
    rhs_low = (1 - eta * sigma_l**2) * low_norm + c0**-0.5 * eta * delta_bar
    rhs_high = high_norm + eta * sigma_lp1 * delta_bar
    return rhs_low, rhs_high


def strong_constants(sigma, level: int) -> tuple[float, float]:
    """c1 = sigma_L^2 and c2 = sum_{i=L+1}^r sigma_i^2."""
    s = np.asarray(sigma, dtype=float)
    s = s[s > 0]
    if not 1 <= level <= s.size:
        raise ValueError(f"truncation level {level} outside 1..{s.size}")
    return float(s[level - 1] ** 2), float(np.sum(s[level:] ** 2))


def strong_preasymptotic_step(e, projectors: FrequencyProjectors, sigma, eta: float, c0: float,
                              delta_bar: float) -> tuple[float, float]:
    """Right-hand sides for E[||P_L e_{k+1}||^2 | e_k] and E[||P_H e_{k+1}||^2 | e_k]."""
    _check_step(eta, c0)
    e = np.asarray(e, dtype=float)
    c1, c2 = strong_constants(sigma, projectors.level)
    lo, hi = (float(v) for v in projectors.split_sq(e))
    enorm = math.sqrt(float(e @ e))
    sigma1 = float(np.max(sigma))
    rhs_low = ((1 - c1 * eta) * lo + c2 / c0 * eta**2 * hi
               + eta * delta_bar / c0 * (eta * delta_bar + 2 * math.sqrt(2) * sigma1 * enorm))
    rhs_high = (c2 / c0 * eta**2 * lo + (1 + c2 / c0 * eta**2) * hi + eta**2 * delta_bar**2 / c0
                + 2 * math.sqrt(2) * math.sqrt(c2) * eta * delta_bar * math.sqrt(hi + eta**2 / c0**2 * enorm**2))
    return rhs_low, rhs_high


def one_step_mean(problem: LinearProblem, noise, e, eta: float) -> np.ndarray:
    """E[e_{k+1} | e_k]: the average of the n equally likely row updates."""
    return sgd_update(np.asarray(e, float)[None, :], problem.a_matrix, noise, eta).mean(axis=0)


def one_step_second_moments(problem: LinearProblem, noise, e, eta: float, projectors: FrequencyProjectors):
    """(E[||P_L e_{k+1}||^2 | e_k], E[||P_H e_{k+1}||^2 | e_k]) by the n-term average."""
    nxt = sgd_update(np.asarray(e, float)[None, :], problem.a_matrix, noise, eta)
    lo, hi = projectors.split_sq(nxt)
    return float(lo.mean()), float(hi.mean())


def check_preasymptotic(problem: LinearProblem, level: int, n_states: int = 100, seed: int = 0,
                        step_fractions=(1.0, 0.5), delta_range=(0.0, 0.1)) -> dict[str, BoundReport]:
    """One-step checks of the weak, strong and exact-data strong inequalities.

    States e_k are Gaussian, noise vectors are Gaussian directions with norm
    uniform in ``delta_range``; eta runs over ``step_fractions`` times c0.
    """
    rng = np.random.default_rng(seed)
    dec = problem.decomposition
    sigma = dec.sigma
    proj = spectral_split(dec, level)
    c0 = 1.0 / problem.max_row_norm_sq
    sig_l = float(sigma[level - 1])
    sig_lp1 = float(dec.sigma_full[level]) if level < dec.sigma_full.size else 0.0
    rows = {key: ([], []) for key in ("weak-low", "weak-high", "strong-low", "strong-high", "exact-low", "exact-high")}
    for _ in range(n_states):
        e = rng.standard_normal(problem.m) * rng.uniform(0.1, 2.0)
        g = rng.standard_normal(problem.n)
        xi = g / np.linalg.norm(g) * rng.uniform(*delta_range)
        dbar = float(np.linalg.norm(xi)) / math.sqrt(problem.n)
        for frac in step_fractions:
            eta = frac * c0
            mean_next = one_step_mean(problem, xi, e, eta)
            w_lo, w_hi = weak_preasymptotic_step(float(np.linalg.norm(proj.low(e))), float(np.linalg.norm(proj.high(e))),
                                                 sig_l, sig_lp1, eta, c0, dbar)
            rows["weak-low"][0].append(float(np.linalg.norm(proj.low(mean_next))))
            rows["weak-low"][1].append(w_lo)
            rows["weak-high"][0].append(float(np.linalg.norm(proj.high(mean_next))))
            rows["weak-high"][1].append(w_hi)
            s_lo, s_hi = strong_preasymptotic_step(e, proj, sigma, eta, c0, dbar)
            l_lo, l_hi = one_step_second_moments(problem, xi, e, eta, proj)
            rows["strong-low"][0].append(l_lo)
            rows["strong-low"][1].append(s_lo)
            rows["strong-high"][0].append(l_hi)
            rows["strong-high"][1].append(s_hi)
            x_lo, x_hi = strong_preasymptotic_step(e, proj, sigma, eta, c0, 0.0)
            z_lo, z_hi = one_step_second_moments(problem, np.zeros(problem.n), e, eta, proj)
            rows["exact-low"][0].append(z_lo)
            rows["exact-low"][1].append(x_lo)
            rows["exact-high"][0].append(z_hi)
            rows["exact-high"][1].append(x_hi)
    params = {"n": problem.n, "m": problem.m, "L": level, "c0": c0, "sigma_L": sig_l, "sigma_L+1": sig_lp1,
              "seed": seed, "step_fractions": list(step_fractions)}
    return {key: BoundReport(f"preasymptotic-{key}", np.arange(len(l)), l, r, params) for key, (l, r) in rows.items()}


# --- initial frequency energy ---------------------------------------------

def expected_frequency_energy(sigma, p: float, level: int) -> tuple[float, float]:
    """(sum_{i<=L} sigma_i^{4p}, sum_{L<i<=r} sigma_i^{4p}) for e_1 = B^p w, w ~ N(0, I)."""
    s = np.asarray(sigma, dtype=float)
    s = s[s > 0]
    if not 1 <= level <= s.size:
        raise ValueError(f"truncation level {level} outside 1..{s.size}")
    pw = psd_power(s**2, 2 * p)
    return float(np.sum(pw[:level])), float(np.sum(pw[level:]))


def monte_carlo_frequency_energy(sigma, p: float, level: int, n_samples: int, seed: int = 0,
                                 v: np.ndarray | None = None) -> tuple[float, float]:
    """Empirical means of ||P_L e_1||^2 and ||P_H e_1||^2 with e_1 = B^p w, B = V diag(sigma^2) V^T."""
    s = np.asarray(sigma, dtype=float)
    m = s.size
    rng = np.random.default_rng(seed)
    if v is None:
        v = random_orthonormal(m, rng)
    w = rng.standard_normal((n_samples, m))
    e1 = (w @ v) * psd_power(s**2, p)  # coordinates of B^p w in the V basis
    e1 = e1 @ v.T
    proj = FrequencyProjectors(v[:, :level], v[:, level:np.count_nonzero(s > 0)], level)
    lo, hi = proj.split_sq(e1)
    return float(lo.mean()), float(hi.mean())


def frequency_energy_ratio_bound(p: float, beta: float, level: int, m: int) -> float:
    """Lower bound on low/high initial energy for sigma_i = i^{-beta}, 4 p beta > 1."""
    q = 1 - 4 * p * beta
    if q >= 0:
        raise ValueError("needs 4 p beta > 1")
    return (1 - (level + 1) ** q) / (level**q - m**q)


# --- schedule lemmas -------------------------------------------------------

def lemma_a1_check(n_draws: int = 100, max_dim: int = 8, powers=(0.0, 0.5, 1.0, 2.0), seed: int = 0) -> BoundReport:
    """||prod (I - eta_i S) S^p|| <= p^p/(e^p (sum eta)^p) on random SPD matrices.

    The left side is the spectral norm of the explicitly multiplied matrices.
    """
    rng = np.random.default_rng(seed)
    lhs, rhs, idx = [], [], []
    for t in range(n_draws):
        d = int(rng.integers(1, max_dim + 1))
        q = random_orthonormal(d, rng)
        lam = rng.uniform(0, 1, d) ** 3 * rng.uniform(0.1, 10)
        s_mat = (q * lam) @ q.T
        s_mat = 0.5 * (s_mat + s_mat.T)
        snorm = float(np.max(lam))
        length = int(rng.integers(2, 40))
        etas = rng.uniform(0.05, 1.0, length) / snorm
        prod = np.eye(d)
        for eta in etas:
            prod = prod @ (np.eye(d) - eta * s_mat)
        for p in powers:
            sp = (q * psd_power(lam, p)) @ q.T
            lhs.append(float(np.linalg.norm(prod @ sp, 2)))
            rhs.append(kernel_bound(p, float(etas.sum())))
            idx.append(t)
    return BoundReport("lemma-A1", np.array(idx), lhs, rhs, {"n_draws": n_draws, "powers": list(powers)})


def lemma_a2_sums(alpha: float, c0: float, k: int, r: float) -> tuple[float, float, float, float]:
    """(sum eta_i, its lower bound, sum_{j<k} eta_j/(sum_{i>j} eta_i)^r, its upper bound)."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    if not 0 <= r <= 1:
        raise ValueError("r must lie in [0, 1]")
    if k < 2:
        raise ValueError("k must be >= 2")
    etas = c0 * np.arange(1, k + 1, dtype=float) ** (-alpha)
    lhs1 = float(etas.sum())
    rhs1 = (2 ** (1 - alpha) - 1) / (1 - alpha) * c0 * k ** (1 - alpha)
    tails = np.cumsum(etas[::-1])[::-1]  # tails[j] = sum_{i=j+1}^k eta_i (0-based j)
    lhs2 = float(np.sum(etas[: k - 1] / tails[1:k] ** r))
    if r < 1:
        rhs2 = c0 ** (1 - r) * beta_function(1 - alpha, 1 - r) * k ** ((1 - r) * (1 - alpha))
    else:
        rhs2 = 2**alpha * (1 / (1 - alpha) + math.log(k))
    return lhs1, rhs1, lhs2, rhs2


def _is_degenerate(x: float) -> bool:
    return abs(x) < 1e-12


def lemma_a3_constants(alpha: float, beta: float, r: float, c0: float) -> tuple[float, float]:
    g = 2 * alpha + beta
    if _is_degenerate(g - 1):
        c = 2.0
    elif g > 1:
        c = 2**r / (g - 1)
    else:
        c = 2 ** (r - 1 + g) / (1 - g)
    if _is_degenerate(r - 1):
        cp = 1.0
    elif r > 1:
        cp = 1 / (r - 1)
    else:
        cp = 2 ** (r - 1) / (1 - r)
    return c0 ** (2 - r) * c, 2**g * c0 ** (2 - r) * cp


def lemma_a3_sums(alpha: float, beta: float, r: float, c0: float, k: int) -> dict:
    """Both half-range sums of eta_j^2 j^{-beta}/(sum_{i>j} eta_i)^r and their bounds."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    if r < 0:
        raise ValueError("r must be nonnegative")
    if k < 4:
        raise ValueError("k must be >= 4")
    etas = c0 * np.arange(1, k + 1, dtype=float) ** (-alpha)
    tails = np.cumsum(etas[::-1])[::-1]
    j = np.arange(1, k, dtype=float)
    terms = etas[: k - 1] ** 2 / tails[1:k] ** r * j ** (-beta)
    half = k // 2
    lhs1, lhs2 = float(terms[:half].sum()), float(terms[half:].sum())
    c, cp = lemma_a3_constants(alpha, beta, r, c0)
    g = 2 * alpha + beta
    lnk = math.log(k)
    f1 = lnk if _is_degenerate(1 - g) else k ** max(0.0, 1 - g)
    f2 = lnk if _is_degenerate(1 - r) else k ** max(0.0, 1 - r)
    rhs1 = c * k ** (-r * (1 - alpha)) * f1
    rhs2 = cp * k ** (-((2 - r) * alpha + beta)) * f2
    return {"lhs1": lhs1, "rhs1": rhs1, "lhs2": lhs2, "rhs2": rhs2, "c": c, "c_prime": cp}


def _ab_recursion(alpha: float, c0: float, c1: float, c2: float, b: np.ndarray, k_max: int, a1: float) -> np.ndarray:
    etas = c0 * np.arange(1, k_max + 1, dtype=float) ** (-alpha)
    csum = np.cumsum(etas)
    a = np.empty(k_max + 1)
    a[0] = a1
    w = etas**2
    for k in range(1, k_max + 1):
        hist = 0.0
        if k >= 2:
            hist = float(np.sum(w[: k - 1] / (csum[k - 1] - csum[: k - 1]) * a[: k - 1]))
        a[k] = c1 * hist + c2 * k ** (-2 * alpha) * a[k - 1] + b[k - 1]
    return a


def lemma_a4_recursion(alpha: float, c0: float, c1: float, c2: float, b_sequence, k_max: int, *,
                       a1: float = 1.0, gamma: float | None = None, ell: int = 1) -> BoundReport:
    """Roll out a_{k+1} = c1 sum_{j<k} eta_j^2/(sum_{i=j+1}^k eta_i) a_j + c2 k^{-2a} a_k + b_k.

    Main branch (b nondecreasing, ``gamma`` unset): envelope c k^{-min(a,1-a)} ln k + 2 b_k.
    Decay branch (b_j <= c3 j^{-gamma}): envelope c k^{-min(ell a, 1-a, gamma)} ln^ell k.
    The reported constant c is the smallest one that works on k = 2..k_max; the
    check passes when the worst ratio on the upper half of the range does not
    exceed the worst ratio on the lower half (no upward drift).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    b = np.asarray(b_sequence, dtype=float)
    if b.size < k_max:
        raise ValueError(f"b sequence has {b.size} entries, need {k_max}")
    b = b[:k_max]
    if np.any(b < 0):
        raise ValueError("b must be nonnegative")
    if gamma is None:
        if np.any(np.diff(b) < 0):
            raise ValueError("b is not nondecreasing and no decay exponent gamma was given")
        branch = "main"
    else:
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        branch = "decay"
    a = _ab_recursion(alpha, c0, c1, c2, b, k_max, a1)
    ks = np.arange(2, k_max + 1)
    kf = ks.astype(float)
    lhs = a[ks]  # a_{k+1} sits at index k
    if branch == "main":
        shape = kf ** (-min(alpha, 1 - alpha)) * np.log(kf)
        offset = 2 * b[ks - 1]
        exponent = min(alpha, 1 - alpha)
    else:
        exponent = min(ell * alpha, 1 - alpha, gamma)
        shape = kf ** (-exponent) * np.log(kf) ** ell
        offset = np.zeros_like(kf)
    ratio = np.maximum(lhs - offset, 0.0) / shape
    c = float(np.max(ratio))
    head = ks <= k_max // 2
    drift_ok = bool(np.max(ratio[~head]) <= np.max(ratio[head]) * (1 + 1e-12)) if np.any(~head) else True
    rhs = c * shape + offset
    return BoundReport(
        f"lemma-A4-{branch}", ks, lhs, rhs,
        {"alpha": alpha, "c0": c0, "c1": c1, "c2": c2, "gamma": gamma, "ell": ell, "branch": branch,
         "exponent": exponent, "constant": c, "k_max": k_max},
        conditions={"finite_constant": bool(np.isfinite(c)), "no_upward_drift": drift_ok},
    )


# --- grid checks -----------------------------------------------------------

GRID_KS = (16, 64, 256, 1024, 4096)
GRID_ALPHAS = tuple(round(0.1 * i, 1) for i in range(1, 10))


def reference_problem(beta: float, p: float, m: int = 8, seed: int = 0) -> tuple[LinearProblem, SourceConfig]:
    """m x m synthetic problem with sigma_i = i^{-beta} and a seeded representer w."""
    w = np.random.default_rng(seed + 1000).standard_normal(m)
    src = SourceConfig(p, w)
    return build_synthetic_problem(m, m, {"kind": "polynomial", "beta": beta}, src, seed=seed), src


def check_approximation(problem: LinearProblem, source: SourceConfig, alpha: float, s: float, k_max: int = 500) -> BoundReport:
    """Exact ||B^s E[e_{k+1}]|| from the mean recursion vs the closed-form bound."""
    sched = StepSchedule.for_problem(problem, alpha)
    obs = NoisyObservation.exact(problem)
    means = exact_mean_recursion(problem, obs, sched, k_max)
    bs = problem.decomposition.gram_power(s)
    e = (means[1:] - problem.x_true) @ bs.T
    ks = np.arange(1, k_max + 1)
    lhs = np.linalg.norm(e, axis=1)
    rhs = approximation_bound(source.p, s, alpha, sched.c0, source.w_norm, ks)
    return BoundReport("approximation", ks, lhs, rhs, {"alpha": alpha, "p": source.p, "s": s, "c0": sched.c0,
                                                       "w_norm": source.w_norm})


def propagation_errors(problem: LinearProblem, noise: np.ndarray, schedule: StepSchedule, k_max: int) -> np.ndarray:
    """nu_1 = 0, nu_{k+1} = (I - eta_k B) nu_k + eta_k n^{-1} A^T xi; rows nu_1..nu_{k_max+1}."""
    b = problem.gram
    atxi = problem.a_matrix.T @ noise / problem.n
    out = np.zeros((k_max + 1, problem.m))
    nu = np.zeros(problem.m)
    for k, eta in enumerate(schedule.etas(k_max), start=1):
        nu = nu - eta * (b @ nu) + eta * atxi
        out[k] = nu
    return out


def check_propagation(problem: LinearProblem, alpha: float, s: float, delta_bar: float, k_max: int = 500,
                      seed: int = 0) -> BoundReport:
    sched = StepSchedule.for_problem(problem, alpha)
    g = np.random.default_rng(seed).standard_normal(problem.n)
    xi = g / np.linalg.norm(g) * delta_bar * math.sqrt(problem.n)
    nu = propagation_errors(problem, xi, sched, k_max)
    bs = problem.decomposition.gram_power(s)
    ks = np.arange(1, k_max + 1)
    lhs = np.linalg.norm(nu[1:] @ bs.T, axis=1)
    rhs = propagation_bound(s, alpha, sched.c0, delta_bar, ks)
    return BoundReport("propagation", ks, lhs, rhs, {"alpha": alpha, "s": s, "r": 0.5 + s, "c0": sched.c0,
                                                     "delta_bar": delta_bar})


def check_variance(problem: LinearProblem, observation: NoisyObservation, schedule: StepSchedule, s: float,
                   k_max: int) -> BoundReport:
    """Enumeration-exact E||B^s(x_{k+1} - E x_{k+1})||^2 against the residual-weighted sum."""
    laws = exact_laws(problem, observation, schedule, k_max + 1)
    bs = problem.decomposition.gram_power(s)
    resid = np.array([law.mean_residual_sq(problem.a_matrix, observation.y_noisy) for law in laws])
    ks = np.arange(0, k_max + 1)
    lhs = np.array([laws[k].weighted_variance(bs) for k in ks])
    rhs = np.array([variance_bound_rhs(problem, observation, schedule, s, int(k), resid) for k in ks])
    return BoundReport("variance", ks, lhs, rhs, {"s": s, "alpha": schedule.alpha, "c0": schedule.c0,
                                                  "delta": observation.delta_abs, "n": problem.n})


def check_frequency_energy(sigma, p: float, level: int, n_samples: int = 10_000, seed: int = 0,
                           rtol: float = 0.05) -> BoundReport:
    """Monte Carlo means vs exact power sums; rhs is the allowed relative deviation."""
    lo, hi = expected_frequency_energy(sigma, p, level)
    mlo, mhi = monte_carlo_frequency_energy(sigma, p, level, n_samples, seed)
    lhs = [abs(mlo - lo) / lo, abs(mhi - hi) / hi]
    return BoundReport("frequency-energy", np.arange(2), lhs, [rtol, rtol],
                       {"p": p, "L": level, "n_samples": n_samples, "exact": [lo, hi], "estimate": [mlo, mhi]})


def check_lemma_a2(alphas=GRID_ALPHAS, rs=(0.0, 0.5, 1.0), ks=GRID_KS, c0: float = 1.0) -> tuple[BoundReport, BoundReport]:
    l1, r1, l2, r2, idx, pars = [], [], [], [], [], []
    for a in alphas:
        for r in rs:
            for k in ks:
                v = lemma_a2_sums(a, c0, k, r)
                l1.append(v[0]); r1.append(v[1]); l2.append(v[2]); r2.append(v[3])
                idx.append(k)
                pars.append((a, r, k))
    params = {"grid": pars, "c0": c0}
    return (BoundReport("lemma-A2-step-sum", idx, l1, r1, params, sense=">="),
            BoundReport("lemma-A2-weighted-sum", idx, l2, r2, params))


def check_lemma_a3(alphas=GRID_ALPHAS, betas=(0.0, 0.5, 1.0), rs=(0.0, 1.0, 2.0), ks=GRID_KS,
                   c0: float = 1.0) -> tuple[BoundReport, BoundReport]:
    l1, r1, l2, r2, idx, pars = [], [], [], [], [], []
    for a in alphas:
        for bt in betas:
            for r in rs:
                for k in ks:
                    v = lemma_a3_sums(a, bt, r, c0, k)
                    l1.append(v["lhs1"]); r1.append(v["rhs1"]); l2.append(v["lhs2"]); r2.append(v["rhs2"])
                    idx.append(k)
                    pars.append((a, bt, r, k))
    params = {"grid": pars, "c0": c0}
    return (BoundReport("lemma-A3-first-half", idx, l1, r1, params),
            BoundReport("lemma-A3-second-half", idx, l2, r2, params))


def _traced_lhs_from_laws(problem, obs, sched, k_max):
    laws = exact_laws(problem, obs, sched, k_max + 1)
    res = np.array([law.mean_residual_sq(problem.a_matrix, obs.y_noisy) for law in laws])
    err = np.array([law.mean_error_sq(problem.x_true) for law in laws])
    var = np.array([law.variance for law in laws])
    return res, err, var


def _toy_source(problem: LinearProblem) -> SourceConfig:
    # x_true - x_1 = B^{1/2} w with w = B^{-1/2}(x_true - x_1); exact since x_true is in range(A^T)
    w = problem.decomposition.gram_power(-0.5) @ (problem.x_true - problem.x_init)
    return SourceConfig(0.5, w)


def check_residual_traced(problem: LinearProblem, observation: NoisyObservation, schedule: StepSchedule,
                          source: SourceConfig, k_max: int) -> BoundReport:
    res, _, _ = _traced_lhs_from_laws(problem, observation, schedule, k_max)
    consts = TracedConstants.for_problem(problem, observation, schedule, source)
    ks = np.arange(2, k_max + 1)
    rhs = residual_bound(schedule.alpha, source.p, ks, observation.delta_abs, "traced", traced=consts)
    return BoundReport("residual-traced", ks, res[ks], rhs, _traced_params(consts, observation))


def check_total_error_traced(problem: LinearProblem, observation: NoisyObservation, schedule: StepSchedule,
                             source: SourceConfig, k_max: int) -> BoundReport:
    _, err, _ = _traced_lhs_from_laws(problem, observation, schedule, k_max)
    consts = TracedConstants.for_problem(problem, observation, schedule, source)
    ks = np.arange(2, k_max + 1)
    rhs = total_error_bound(schedule.alpha, source.p, ks, observation.delta_abs, observation.delta_bar, "traced",
                            traced=consts)
    return BoundReport("total-error-traced", ks, err[ks], rhs, _traced_params(consts, observation))


def _traced_params(consts: TracedConstants, obs: NoisyObservation) -> dict:
    return {"alpha": consts.alpha, "p": consts.p, "c0": consts.c0, "A_norm": consts.a_norm, "w_norm": consts.w_norm,
            "r1": consts.r1, "c1": consts.c1, "c2": consts.c2, "c3": consts.c3, "c4": consts.c4,
            "c_alpha": consts.c_alpha, "delta": obs.delta_abs, "delta_bar": obs.delta_bar,
            "c_alpha_matches_propagation_constant_squared":
                bool(math.isclose(consts.c_alpha, propagation_constant(1.0, consts.alpha, consts.c0) ** 2, rel_tol=1e-12))}


def check_fitted_rates(problem: LinearProblem, observation: NoisyObservation, schedule: StepSchedule, p: float,
                       k_max: int) -> dict[str, BoundReport]:
    """Fitted-constant envelopes for residual, total error and variance on enumeration-exact values."""
    res, err, var = _traced_lhs_from_laws(problem, observation, schedule, k_max)
    a = schedule.alpha
    ks = np.arange(2, k_max + 1)
    d, db = observation.delta_abs, observation.delta_bar
    base = {"alpha": a, "p": p, "delta": d, "delta_bar": db}
    return {
        "residual": check_fitted_envelope("residual-fitted", ks, res[ks], residual_basis(a, p, ks, d),
                                          dict(base, exponent=residual_exponent(a, p))),
        "total": check_fitted_envelope("total-error-fitted", ks, err[ks], total_error_basis(a, p, ks, d, db),
                                       dict(base, exponent=total_error_exponent(a, p))),
        "variance": check_fitted_envelope("variance-fitted", ks, var[ks], variance_basis(a, p, ks, d),
                                          dict(base, exponent=variance_exponent(a, p))),
    }


def toy_setup(n: int, alpha: float, delta: float, seed: int = 0):
    """Toy problem with unit rows, c0 = 1 schedule and scaled noise."""
    prob = build_toy_problem(n, n, seed=seed, name=f"toy{n}")
    obs = add_scaled_noise(prob, delta, seed=seed + 1) if delta > 0 else NoisyObservation.exact(prob)
    return prob, obs, StepSchedule.for_problem(prob, alpha, c0=1.0)


THEOREM_KEYS = ("3.1", "3.2", "3.3", "3.4", "2.2", "2.3", "2.4", "L4.1", "L5.1", "P5.1", "A.1", "A.2", "A.3", "A.4")


def run_bound_suite(theorems=None, seed: int = 0) -> dict[str, list[BoundReport]]:
    """Full inequality grid, keyed by theorem label; ``theorems`` filters the labels."""
    want = set(THEOREM_KEYS if theorems is None else theorems)
    unknown = want - set(THEOREM_KEYS)
    if unknown:
        raise ValueError(f"unknown theorem labels {sorted(unknown)}; choose from {list(THEOREM_KEYS)}")
    out: dict[str, list[BoundReport]] = {}
    alphas = (0.1, 0.3, 0.5, 0.7)
    if "3.1" in want or "3.2" in want:
        for beta in (1.0, 2.0):
            for p in (0.0, 0.5, 1.0):
                prob, src = reference_problem(beta, p, seed=seed)
                for a in alphas:
                    if "3.1" in want:
                        for s in (0.0, 0.5):
                            rep = check_approximation(prob, src, a, s)
                            rep.params["beta"] = beta
                            out.setdefault("3.1", []).append(rep)
                    if "3.2" in want and p == 0.0:
                        for s in (-0.5, 0.0, 0.5):
                            for db in (1e-3, 1e-2):
                                rep = check_propagation(prob, a, s, db, seed=seed)
                                rep.params["beta"] = beta
                                out.setdefault("3.2", []).append(rep)
    toys = [(n, a, d) for n in (2, 3) for a in (0.1, 0.5) for d in (0.0, 0.05)]
    if "3.3" in want:
        for n, a, d in toys:
            prob, obs, sched = toy_setup(n, a, d, seed)
            for s in (0.0, 0.5):
                rep = check_variance(prob, obs, sched, s, 5)
                rep.params["n"] = n
                out.setdefault("3.3", []).append(rep)
    if "3.4" in want or "2.2" in want:
        for n, a, d in toys:
            prob, obs, sched = toy_setup(n, a, d, seed)
            src = _toy_source(prob)
            k_max = 8 if n == 3 else 12
            if "3.4" in want:
                out.setdefault("3.4", []).append(check_residual_traced(prob, obs, sched, src, k_max))
            if "2.2" in want:
                out.setdefault("2.2", []).append(check_total_error_traced(prob, obs, sched, src, k_max))
    if "L4.1" in want:
        for n, a, d in toys:
            prob, obs, sched = toy_setup(n, a, d, seed)
            k_max = 8 if n == 3 else 12
            out.setdefault("L4.1", []).append(check_fitted_rates(prob, obs, sched, 0.5, k_max)["variance"])
    if want & {"2.3", "2.4", "L5.1"}:
        for size in (5, 6):
            prob = build_synthetic_problem(size, size, {"kind": "polynomial", "beta": 1.0},
                                           SourceConfig(1.0, np.ones(size)), seed=seed + size)
            for level in (1, 2, 3):
                reps = check_preasymptotic(prob, level, seed=seed + 10 * size + level)
                for key, rep in reps.items():
                    label = {"weak": "2.3", "strong": "2.4", "exact": "L5.1"}[key.split("-")[0]]
                    if label in want:
                        out.setdefault(label, []).append(rep)
    if "P5.1" in want:
        sigma = np.arange(1, 51, dtype=float) ** -2.0
        for p in (0.5, 1.0):
            out.setdefault("P5.1", []).append(check_frequency_energy(sigma, p, 5, seed=seed))
    if "A.1" in want:
        out["A.1"] = [lemma_a1_check(seed=seed)]
    if "A.2" in want:
        out["A.2"] = list(check_lemma_a2())
    if "A.3" in want:
        out["A.3"] = list(check_lemma_a3())
    if "A.4" in want:
        k_max = 10_000
        out["A.4"] = [
            lemma_a4_recursion(0.5, 1.0, 0.1, 0.1, np.zeros(k_max), k_max),
            lemma_a4_recursion(0.3, 1.0, 0.1, 0.1, np.full(k_max, 0.01), k_max),
            lemma_a4_recursion(0.3, 1.0, 0.1, 0.1, 1.0 / np.arange(1, k_max + 1), k_max, gamma=1.0, ell=2),
        ]
    return out
