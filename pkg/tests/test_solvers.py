import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgdreg.analysis import run_ensemble
from sgdreg.model import LinearProblem, NoisyObservation, add_noise, build_toy_problem
from sgdreg.solvers import (
    INDEX_BLOCK, ScheduleError, StepSchedule, a_priori_stopping_index, balancing_exponent, draw_indices,
    exact_mean_recursion, index_rng, resolve_grid, run_landweber, run_sgd, sgd_step, thinned_grid,
)


def _plain(a, x_true, x_init=None):
    a = np.asarray(a, float)
    x_true = np.asarray(x_true, float)
    x1 = np.zeros(a.shape[1]) if x_init is None else np.asarray(x_init, float)
    return LinearProblem(a, x_true, a @ x_true, x1)


def test_sgd_step_examples():
    prob = _plain([[1.0, 0.0], [1.0, 1.0]], [1.0, 0.0])
    np.testing.assert_allclose(sgd_step([0.0, 0.0], 1, prob, [1.0, 0.0], 0.5), [0.5, 0.0])
    np.testing.assert_allclose(sgd_step([1.0, 1.0], 2, prob, [1.0, 0.0], 0.25), [0.5, 0.5])
    x = np.array([1.0, 5.0])
    np.testing.assert_array_equal(sgd_step(x, 1, prob, [1.0, 0.0], 0.7), x)
    with pytest.raises(IndexError):
        sgd_step(x, 3, prob, [1.0, 0.0], 0.5)


def test_schedule_validation():
    prob = _plain([[2.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    sched = StepSchedule.for_problem(prob, 0.1)
    assert sched.c0 == 0.25 and not sched.outside_theory
    assert np.all(np.diff(sched.etas(50)) <= 0)
    with pytest.raises(ScheduleError):
        StepSchedule.for_problem(prob, 0.1, c0=0.5)
    with pytest.raises(ScheduleError):
        StepSchedule(1.0, 1.0, 1.0)
    assert StepSchedule.for_problem(prob, 0.0).outside_theory


def test_run_rejects_inadmissible_schedule():
    prob = _plain([[2.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    sched = StepSchedule(1.0, 0.1, 1.0)  # admissible for unit rows, not for this problem
    with pytest.raises(ScheduleError):
        run_sgd(prob, NoisyObservation.exact(prob), sched, 5, seed=0)


def test_single_row_is_deterministic():
    prob = _plain([[0.6, 0.8]], [1.0, 2.0])
    obs = NoisyObservation.exact(prob)
    sched = StepSchedule.for_problem(prob, 0.3)
    t1 = run_sgd(prob, obs, sched, 30, seed=1, record_iterates=True)
    t2 = run_sgd(prob, obs, sched, 30, seed=99, record_iterates=True)
    lw = run_landweber(prob, obs, sched, 30, record_iterates=True)
    np.testing.assert_array_equal(t1.iterates, t2.iterates)
    np.testing.assert_allclose(t1.iterates, lw.iterates, atol=1e-15)


def test_replay_oracle():
    prob = build_toy_problem(2, 2, seed=5)
    obs = add_noise(prob, 0.05, seed=2)
    sched = StepSchedule.for_problem(prob, 0.5, c0=1.0)
    traj = run_sgd(prob, obs, sched, 3, seed=17, record_iterates=True, record_indices=True)
    x = prob.x_init
    for k, i in enumerate(traj.indices, start=1):
        x = sgd_step(x, int(i), prob, obs.y_noisy, sched.eta(k))
    np.testing.assert_array_equal(traj.iterates[-1], x)
    assert traj.index_stream_seed == 17


def test_index_stream_blocks_and_determinism():
    a = draw_indices(index_rng(3, 1), 5, 10)
    b = draw_indices(index_rng(3, 1), 5, 2 * INDEX_BLOCK + 7)
    np.testing.assert_array_equal(a, b[:10])
    assert not np.array_equal(draw_indices(index_rng(3, 2), 5, 10), a)


def test_trajectories_bitwise_reproducible(toy3):
    prob, _, sched = toy3
    obs = add_noise(prob, 0.01, seed=1)
    t1 = run_sgd(prob, obs, sched, 200, seed=4, grid="log")
    t2 = run_sgd(prob, obs, sched, 200, seed=4, grid="log")
    assert t1.errors_sq.tobytes() == t2.errors_sq.tobytes()


def test_exact_data_convergence():
    prob = build_toy_problem(6, 4, seed=2)
    sched = StepSchedule.for_problem(prob, 0.1, c0=1.0)
    traj = run_sgd(prob, NoisyObservation.exact(prob), sched, 20_000, seed=0, grid="log")
    assert traj.errors_sq[-1] < 1e-3 * traj.errors_sq[0]


def test_landweber_first_step_and_mean_recursion():
    prob = build_toy_problem(4, 3, seed=8)
    obs = add_noise(prob, 0.05, seed=3)
    sched = StepSchedule.for_problem(prob, 0.3, c0=1.0)
    lw = run_landweber(prob, obs, sched, 40, record_iterates=True)
    np.testing.assert_allclose(lw.iterates[1], sched.eta(1) / 4 * prob.a_matrix.T @ obs.y_noisy, atol=1e-15)
    means = exact_mean_recursion(prob, obs, sched, 40)
    np.testing.assert_allclose(lw.iterates, means, atol=1e-12)
    b = prob.gram
    np.testing.assert_allclose(means[1], means[0] - sched.eta(1) * (b @ means[0] - prob.a_matrix.T @ obs.y_noisy / 4))


def test_landweber_contracts_for_orthogonal_rows():
    prob = _plain(np.eye(3), [1.0, -2.0, 0.5])
    traj = run_landweber(prob, NoisyObservation.exact(prob), StepSchedule(1.0, 0.0, 1.0), 20)
    assert np.all(np.diff(traj.errors_sq) < 0)


def test_mean_recursion_fixed_point():
    prob = build_toy_problem(3, 3, seed=1)
    prob = LinearProblem(prob.a_matrix, prob.x_true, prob.y_exact, prob.x_true)
    sched = StepSchedule.for_problem(prob, 0.1, c0=1.0)
    means = exact_mean_recursion(prob, NoisyObservation.exact(prob), sched, 10)
    np.testing.assert_allclose(means, np.tile(prob.x_true, (11, 1)), atol=1e-15)


def test_ensemble_mean_matches_recursion():
    prob = build_toy_problem(4, 4, seed=6)
    obs = add_noise(prob, 0.05, seed=1)
    sched = StepSchedule.for_problem(prob, 0.3, c0=1.0)
    k_max = 20
    stats = run_ensemble(prob, obs, sched, k_max, 10_000, 0, record_mean_iterate=True, chunk_size=2000)
    means = exact_mean_recursion(prob, obs, sched, k_max)[stats.k_grid - 1]
    z = np.abs(stats.mean_iterate - means)[1:] / stats.se_mean_iterate[1:]
    assert np.max(z) < 4.0


def test_grids():
    np.testing.assert_array_equal(resolve_grid(None, 4), [1, 2, 3, 4, 5])
    g = thinned_grid(10_001)
    assert g[0] == 1 and g[-1] == 10_001 and {2, 4, 8, 1024} <= set(g.tolist())
    with pytest.raises(ValueError):
        resolve_grid([0, 3], 4)


def test_stopping_index_examples():
    assert a_priori_stopping_index(0.01, 0.3, rate_exponent=1.0) * 2 == a_priori_stopping_index(0.005, 0.3, rate_exponent=1.0)
    with pytest.raises(ValueError):
        a_priori_stopping_index(0.01, 0.3, rate_exponent=2 / 0.7)
    assert balancing_exponent(0.5, 0.5) == pytest.approx(2.0)
    assert a_priori_stopping_index(0.1, 0.5, p=0.5) == 100


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1e-4, 0.5))
def test_stopping_index_monotone(alpha, delta):
    k1 = a_priori_stopping_index(delta, alpha)
    k2 = a_priori_stopping_index(delta / 2, alpha)
    assert k2 >= k1 >= 1


def test_trajectory_csv_sidecar(tmp_path):
    from sgdreg.io import read_columns_csv, read_json

    prob = build_toy_problem(3, 3, seed=0)
    traj = run_sgd(prob, NoisyObservation.exact(prob), StepSchedule.for_problem(prob, 0.1, c0=1.0), 50, seed=2)
    traj.to_csv(tmp_path / "t.csv")
    cols = read_columns_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(cols["error_sq"], traj.errors_sq)
    assert read_json(tmp_path / "t.csv.json")["index_stream_seed"] == 2
