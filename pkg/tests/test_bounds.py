import math

import numpy as np
import pytest

from sgdreg.analysis import exact_laws
from sgdreg.bounds import (
    BoundReport, TracedConstants, approximation_bound, approximation_constant, balanced_iteration, beta_function,
    check_approximation, check_fitted_rates, check_preasymptotic, check_propagation, check_variance,
    expected_frequency_energy, frequency_energy_ratio_bound, kernel_bound, lemma_a1_check, lemma_a2_sums,
    lemma_a3_constants, lemma_a3_sums, lemma_a4_recursion, monte_carlo_frequency_energy, pi_product_norm,
    propagation_bound, propagation_constant, propagation_errors, reference_problem, residual_basis,
    residual_bound, residual_exponent, run_bound_suite, strong_preasymptotic_step, total_error_bound,
    total_error_exponent, toy_setup, traced_residual_majorant, variance_bound_rhs, variance_exponent,
    weak_preasymptotic_step,
)
from sgdreg.model import (
    LinearProblem, NoisyObservation, SourceConfig, add_scaled_noise, build_synthetic_problem, build_toy_problem,
    spectral_split,
)
from sgdreg.solvers import StepSchedule, a_priori_stopping_index, exact_mean_recursion


# --- report plumbing -------------------------------------------------------

def test_report_tolerance_and_conditions():
    rep = BoundReport("x", [1, 2], [1.0, 2.0 + 1e-11], [1.0, 2.0])
    assert rep.passed and rep.n_violations == 0
    assert not BoundReport("x", [1], [1.1], [1.0]).passed
    assert BoundReport("x", [1], [1.1], [1.0], sense=">=").passed
    assert not BoundReport("x", [1], [0.0], [1.0], conditions={"ok": False}).passed


def test_report_serializes(tmp_path):
    from sgdreg.io import read_columns_csv, read_json

    rep = BoundReport("x", [1, 2], [0.5, 0.25], [1.0, 1.0], {"alpha": 0.1})
    rep.to_json(tmp_path / "r.json")
    rep.to_csv(tmp_path / "r.csv")
    assert read_json(tmp_path / "r.json")["passed"] is True
    np.testing.assert_array_equal(read_columns_csv(tmp_path / "r.csv")["margin"], [0.5, 0.75])


# --- operator products ------------------------------------------------------

def test_pi_product_examples():
    assert pi_product_norm(np.diag([0.7, 0.2]), [0.5, 0.5], 3, 2) == 1.0
    assert pi_product_norm(np.diag([1.0]), [1.0], 1, 1) == 0.0
    etas = 0.5 * np.arange(1, 8, dtype=float) ** -0.3
    val = pi_product_norm(np.diag([0.9, 0.1]), etas, 2, 7, p=0.5)
    assert val <= 0.5**0.5 / (math.e**0.5 * etas[1:].sum() ** 0.5)
    with pytest.raises(ValueError):
        pi_product_norm(np.diag([2.0]), [1.0], 1, 1)


def test_pi_product_matches_explicit_matrix():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    b = (q * [0.9, 0.5, 0.1, 0.0]) @ q.T
    etas = 0.9 * np.arange(1, 11, dtype=float) ** -0.4
    prod = np.eye(4)
    for eta in etas[2:9]:
        prod = prod @ (np.eye(4) - eta * b)
    sp = (q * np.sqrt([0.9, 0.5, 0.1, 0.0])) @ q.T
    assert pi_product_norm(b, etas, 3, 9, p=0.5) == pytest.approx(np.linalg.norm(prod @ sp, 2), rel=1e-12)


def test_mean_error_spectral_identity():
    prob, src = reference_problem(1.0, 1.0)
    sched = StepSchedule.for_problem(prob, 0.3)
    means = exact_mean_recursion(prob, NoisyObservation.exact(prob), sched, 60)
    e1 = prob.x_init - prob.x_true
    dec = prob.decomposition
    lam = dec.gram_eigenvalues
    etas = sched.etas(60)
    for k in (1, 7, 60):
        coeff = np.prod(1 - np.outer(etas[:k], lam), axis=0)
        spectral = np.linalg.norm(dec.v @ (coeff * (dec.v.T @ e1)))
        assert np.linalg.norm(means[k] - prob.x_true) == pytest.approx(spectral, rel=1e-12)


# --- special functions and closed forms -----------------------------------

def test_beta_function():
    assert beta_function(0.5, 0.5) == pytest.approx(math.pi, rel=1e-12)
    for b in (0.1, 0.5, 0.9, 3.0):
        assert beta_function(1.0, b) == pytest.approx(1 / b, rel=1e-12)


def test_alpha_limit_factor():
    a = 0.999
    assert abs((1 - a) / (2 ** (1 - a) - 1) - 1 / math.log(2)) < 1e-3


def test_approximation_examples():
    np.testing.assert_allclose(approximation_bound(0.0, 0.0, 0.4, 1.0, 2.5, np.arange(1, 50)), 2.5)
    expected = (0.25 / (math.e * (math.sqrt(2) - 1))) ** 0.5
    assert approximation_constant(0.5, 0.0, 0.5, 1.0, 1.0) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(ValueError):
        approximation_bound(0.5, 0.0, 1.0, 1.0, 1.0, 3)


def test_approximation_bound_dominates_exact_mean():
    # identity factors with sigma_i = i^-1 / 2 give unit maximal row norm, so c0 = 1 is admissible
    w = np.ones(4) / 2.0
    prob = build_synthetic_problem(4, 4, np.arange(1, 5.0) ** -1 / 2, SourceConfig(0.5, w), identity_factors=True)
    assert prob.max_row_norm_sq == pytest.approx(1.0)
    sched = StepSchedule.for_problem(prob, 0.5, c0=1.0)
    means = exact_mean_recursion(prob, NoisyObservation.exact(prob), sched, 200)
    ks = np.arange(1, 201)
    lhs = np.linalg.norm(means[1:] - prob.x_true, axis=1)
    assert np.all(lhs <= approximation_bound(0.5, 0.0, 0.5, 1.0, 1.0, ks))


def test_propagation_examples():
    assert propagation_constant(0.5, 0.5, 1.0) == pytest.approx((0.5 / math.e) ** 0.5 * math.pi + 1, rel=1e-12)
    np.testing.assert_array_equal(propagation_bound(0.0, 0.3, 1.0, 0.0, np.arange(1, 20)), 0.0)
    with pytest.raises(ValueError):
        propagation_bound(0.75, 0.3, 1.0, 0.01, 5)
    # r = 1 branch grows like max(1, ln k)
    c = propagation_constant(1.0, 0.3, 1.0)
    assert propagation_bound(0.5, 0.3, 1.0, 1.0, 2) == pytest.approx(c)
    assert propagation_bound(0.5, 0.3, 1.0, 1.0, 100) == pytest.approx(c * math.log(100))


def test_propagation_six_by_six():
    base = build_toy_problem(6, 6, seed=12)
    a = base.a_matrix / math.sqrt(0.8)
    prob = LinearProblem(a, base.x_true, a @ base.x_true, base.x_init)
    sched = StepSchedule.for_problem(prob, 0.3, c0=0.8)
    g = np.random.default_rng(1).standard_normal(6)
    xi = g / np.linalg.norm(g) * 0.01 * math.sqrt(6)
    nu = propagation_errors(prob, xi, sched, 100)
    assert np.linalg.norm(nu[100]) <= propagation_bound(0.0, 0.3, 0.8, 0.01, 100)


@pytest.mark.parametrize("s", [-0.5, 0.0, 0.5])
def test_propagation_grid_sample(s):
    prob, _ = reference_problem(2.0, 0.0)
    assert check_propagation(prob, 0.7, s, 1e-2).passed


@pytest.mark.parametrize("s", [0.0, 0.5])
def test_approximation_grid_sample(s):
    prob, src = reference_problem(1.0, 1.0)
    assert check_approximation(prob, src, 0.1, s).passed


# --- variance --------------------------------------------------------------

def test_variance_rhs_zero_cases():
    prob, obs, sched = toy_setup(2, 0.3, 0.05)
    assert variance_bound_rhs(prob, obs, sched, 0.0, 0, []) == 0.0
    with pytest.raises(ValueError):
        variance_bound_rhs(prob, obs, sched, 0.0, 3, [1.0])
    fixed = LinearProblem(prob.a_matrix, prob.x_true, prob.y_exact, prob.x_true)
    rep = check_variance(fixed, NoisyObservation.exact(fixed), sched, 0.0, 5)
    assert np.max(np.abs(rep.lhs)) < 1e-28 and np.max(np.abs(rep.rhs)) < 1e-28


@pytest.mark.parametrize("s", [0.0, 0.5])
@pytest.mark.parametrize("delta", [0.0, 0.05])
def test_variance_bound_on_enumeration(s, delta):
    prob, obs, sched = toy_setup(2, 0.3, delta)
    rep = check_variance(prob, obs, sched, s, 5)
    assert rep.passed
    assert rep.lhs[0] == 0.0


# --- residual and total error ----------------------------------------------

def test_exponents():
    assert residual_exponent(0.2, 1.0) == pytest.approx(0.2)
    assert total_error_exponent(1 / 3, 1.0) == pytest.approx(2 / 3)
    assert variance_exponent(0.2, 0.5) == pytest.approx(0.4)


def test_exact_data_residual_basis():
    basis = residual_basis(0.3, 1.0, np.arange(2, 10), 0.0)
    np.testing.assert_array_equal(basis[1], 0.0)
    val = residual_bound(0.3, 1.0, np.arange(2, 10), 0.0, "fitted", constants=(2.0, 5.0))
    np.testing.assert_allclose(val, 2.0 * basis[0])
    with pytest.raises(ValueError):
        residual_bound(0.3, 1.0, [2, 3], 0.0, "neither")
    with pytest.raises(ValueError):
        residual_bound(0.3, 1.0, [1, 3], 0.0, "fitted", constants=(1.0, 1.0))


def test_balanced_iteration_matches_stopping_index():
    for alpha, p, db in [(0.1, 0.5, 1e-2), (0.3, 1.0, 3e-3), (0.5, 0.5, 1e-1)]:
        assert balanced_iteration(alpha, p, db) == a_priori_stopping_index(db, alpha, p=p)


def test_traced_constants_and_majorant():
    prob, obs, sched = toy_setup(2, 0.3, 0.05)
    src = SourceConfig(0.5, np.ones(2))
    tc = TracedConstants.for_problem(prob, obs, sched, src)
    assert tc.c4 == pytest.approx(4 * propagation_constant(1.0, 0.3, 1.0) ** 2 + 2, rel=1e-12)
    maj = traced_residual_majorant(tc, 0.05, 20)
    assert maj[0] == pytest.approx(tc.r1) and np.all(maj > 0)
    tot = total_error_bound(0.3, 0.5, np.arange(2, 21), 0.05, obs.delta_bar, "traced", traced=tc)
    assert np.all(np.isfinite(tot))


@pytest.mark.parametrize("delta", [0.0, 0.05])
def test_fitted_total_error_three_by_three(delta):
    prob, obs, sched = toy_setup(3, 0.3, delta)
    assert check_fitted_rates(prob, obs, sched, 0.5, 7)["total"].passed


def test_fitted_residual_four_by_four():
    prob, obs, sched = toy_setup(4, 0.5, 0.0)
    reps = check_fitted_rates(prob, obs, sched, 0.5, 11)
    assert reps["residual"].passed
    assert reps["variance"].passed


# --- preasymptotic ----------------------------------------------------------

def _five():
    return build_synthetic_problem(5, 5, {"kind": "polynomial", "beta": 1.0}, SourceConfig(1.0, np.ones(5)), seed=5)


def test_weak_exact_data_and_zero_state():
    lo, hi = weak_preasymptotic_step(2.0, 3.0, 0.5, 0.25, 0.4, 1.0, 0.0)
    assert lo == pytest.approx((1 - 0.4 * 0.25) * 2.0) and hi == 3.0
    assert weak_preasymptotic_step(0.0, 0.0, 0.5, 0.25, 0.4, 1.0, 0.0) == (0.0, 0.0)
    with pytest.raises(ValueError):
        weak_preasymptotic_step(1.0, 1.0, 0.5, 0.25, 1.5, 1.0, 0.0)


def test_strong_zero_state():
    prob = _five()
    proj = spectral_split(prob.decomposition, 2)
    assert strong_preasymptotic_step(np.zeros(5), proj, prob.decomposition.sigma, 0.1, 0.2, 0.0) == (0.0, 0.0)


def test_weak_on_five_by_five():
    reps = check_preasymptotic(_five(), 2, n_states=50, seed=1, delta_range=(0.01 * math.sqrt(5),) * 2)
    assert reps["weak-low"].passed and reps["weak-high"].passed


def test_strong_on_six_by_six():
    prob = build_synthetic_problem(6, 6, {"kind": "polynomial", "beta": 1.0}, SourceConfig(1.0, np.ones(6)), seed=6)
    reps = check_preasymptotic(prob, 2, n_states=100, seed=2)
    for key in ("strong-low", "strong-high", "exact-low", "exact-high"):
        assert reps[key].passed, key


# --- initial frequency energy ----------------------------------------------

def test_energy_examples():
    assert expected_frequency_energy([1.0, 0.5], 1.0, 1) == pytest.approx((1.0, 0.0625))
    assert expected_frequency_energy(np.ones(7), 0.0, 3) == (3.0, 4.0)
    with pytest.raises(ValueError):
        expected_frequency_energy([1.0, 0.5], 1.0, 3)


def test_energy_monte_carlo_and_ratio():
    sigma = np.arange(1, 51, dtype=float) ** -2.0
    lo, hi = expected_frequency_energy(sigma, 1.0, 5)
    mlo, mhi = monte_carlo_frequency_energy(sigma, 1.0, 5, 10_000, seed=3)
    assert abs(mlo / lo - 1) < 0.05 and abs(mhi / hi - 1) < 0.05
    assert lo / hi >= frequency_energy_ratio_bound(1.0, 2.0, 5, 50)


def test_energy_estimator_error_halves():
    sigma = np.arange(1, 21, dtype=float) ** -1.0
    lo, _ = expected_frequency_energy(sigma, 0.5, 3)
    sizes = np.array([100, 200, 400, 800, 1600])
    mse = [np.mean([(monte_carlo_frequency_energy(sigma, 0.5, 3, int(n), seed=s)[0] - lo) ** 2 for s in range(300)])
           for n in sizes]
    slope = np.polyfit(np.log(sizes), np.log(mse), 1)[0]
    assert abs(slope + 1) < 0.2


# --- schedule lemmas ---------------------------------------------------------

def test_kernel_bound_on_random_matrices():
    assert kernel_bound(0.0, 3.0) == 1.0
    assert lemma_a1_check(n_draws=30, seed=4).passed


def test_lemma_a2_examples():
    l1, r1, _, _ = lemma_a2_sums(0.0, 1.0, 50, 0.5)
    assert l1 == pytest.approx(50.0) and r1 == pytest.approx(50.0)
    _, _, l2, r2 = lemma_a2_sums(0.5, 1.0, 100, 0.5)
    assert l2 <= r2 and r2 == pytest.approx(math.pi * 100**0.25)
    _, _, l2, r2 = lemma_a2_sums(0.3, 1.0, 1000, 1.0)
    assert l2 <= r2 and r2 == pytest.approx(2**0.3 * (1 / 0.7 + math.log(1000)))


def test_lemma_a3_examples():
    c, _ = lemma_a3_constants(0.4, 0.2, 1.5, 0.5)
    assert c == pytest.approx(2 * 0.5**0.5)
    v = lemma_a3_sums(0.4, 0.2, 1.0, 1.0, 256)
    assert v["rhs1"] == pytest.approx(2.0 * 256 ** -0.6 * math.log(256))
    v = lemma_a3_sums(0.5, 0.0, 2.0, 1.0, 256)
    assert v["lhs1"] < v["rhs1"] and v["lhs2"] < v["rhs2"]


def test_lemma_a3_zero_power_reduces_to_plain_sum():
    k, a, b = 64, 0.3, 0.5
    v = lemma_a3_sums(a, b, 0.0, 1.0, k)
    j = np.arange(1, k // 2 + 1, dtype=float)
    assert v["lhs1"] == pytest.approx(np.sum(j ** (-2 * a) * j ** (-b)), rel=1e-13)


def test_lemma_a4_decoupled():
    b = np.linspace(0.1, 1.0, 200)
    rep = lemma_a4_recursion(0.4, 1.0, 0.0, 0.0, b, 200)
    np.testing.assert_allclose(rep.lhs, b[1:])
    assert rep.passed and rep.params["constant"] == 0.0


def test_lemma_a4_rollouts():
    k_max = 10_000
    rep = lemma_a4_recursion(0.5, 1.0, 0.1, 0.1, np.zeros(k_max), k_max)
    assert rep.passed and np.isfinite(rep.params["constant"])
    rep = lemma_a4_recursion(0.3, 1.0, 0.1, 0.1, 1.0 / np.arange(1, k_max + 1), k_max, gamma=1.0, ell=2)
    assert rep.passed and rep.params["exponent"] == pytest.approx(0.6)
    with pytest.raises(ValueError):
        lemma_a4_recursion(0.3, 1.0, 0.1, 0.1, 1.0 / np.arange(1, 11), 10)


# --- vanishing error -----------------------------------------------------------

def _second_moment_trace(prob, sched, k_max):
    """Exact E||e_k||^2 for exact data by the deterministic second-moment recursion."""
    a = prob.a_matrix
    e1 = prob.x_init - prob.x_true
    s = np.outer(e1, e1)
    out = [np.trace(s)]
    m = prob.m
    for k in range(1, k_max + 1):
        eta = sched.eta(k)
        acc = np.zeros((m, m))
        for row in a:
            t = np.eye(m) - eta * np.outer(row, row)
            acc += t @ s @ t.T
        s = acc / prob.n
        out.append(np.trace(s))
    return np.array(out)


def test_second_moment_oracle_matches_enumeration():
    prob, obs, sched = toy_setup(3, 0.3, 0.0)
    laws = exact_laws(prob, obs, sched, 7)
    tr = _second_moment_trace(prob, sched, 6)
    np.testing.assert_allclose([law.mean_error_sq(prob.x_true) for law in laws], tr, rtol=1e-12)


def test_error_vanishes_on_reference_problem():
    prob, _ = reference_problem(1.0, 1.0)
    sched = StepSchedule.for_problem(prob, 0.1)
    k_max = 10_000
    means = exact_mean_recursion(prob, NoisyObservation.exact(prob), sched, k_max)
    bias = np.linalg.norm(means - prob.x_true, axis=1) ** 2
    grid = np.unique(np.geomspace(1, k_max + 1, 30).astype(int)) - 1
    assert np.all(np.diff(bias[grid]) <= 1e-15)
    assert bias[-1] < bias[0] / 100
    total = _second_moment_trace(prob, sched, 2000)
    var = total - bias[:2001]
    assert var[-1] < np.max(var) / 100


def test_suite_filter():
    out = run_bound_suite(["2.4"])
    assert set(out) == {"2.4"} and all(r.passed for r in out["2.4"])
