import numpy as np
import pytest

from src.errors import ContractError, DivergenceError, ZeroTransferFunctionError
from src.plant import (
    LtiStateSpace,
    RunLog,
    Trajectory,
    TransferFunctionModel,
    simulate,
    ss_to_tf,
    step_lti,
    tf_to_ss,
)
from src.plant.conversion import faddeev_leverrier
from src.plant.systems import benchmark_trajectory, step_trajectory, two_tone_trajectory

from .conftest import random_stable_system


def test_step_lti_returns_output_of_current_state(stable_sys):
    x_next, y = step_lti(stable_sys, np.array([1.0, 1.0]), 0.0)
    assert y == pytest.approx(0.8)
    np.testing.assert_allclose(x_next, [1.0, 0.65])


def test_step_lti_rejects_wrong_state_shape(stable_sys):
    with pytest.raises(ContractError):
        step_lti(stable_sys, np.zeros(3), 0.0)


def test_lti_state_space_validates_dimensions():
    with pytest.raises(ContractError):
        LtiStateSpace(A=np.eye(2), b=[1.0, 0.0, 0.0], c=[1.0, 0.0])
    with pytest.raises(ContractError):
        LtiStateSpace(A=np.ones((2, 3)), b=[1.0, 0.0], c=[1.0, 0.0])


def test_model_arrays_are_read_only(stable_sys):
    with pytest.raises(ValueError):
        stable_sys.A[0, 0] = 5.0


def test_simulate_impulse_response_of_stable_system(stable_sys):
    u = np.zeros(6)
    u[0] = 1.0
    log = simulate(stable_sys, Trajectory(u))
    # y(1) = c b, y(2) = c A b
    assert log.y.values[0] == 0.0
    assert log.y.values[1] == pytest.approx(1.0)
    assert log.y.values[2] == pytest.approx(float(stable_sys.c @ stable_sys.A @ stable_sys.b))
    assert len(log) == 6
    assert log.x.shape == (6, 2)


def test_simulate_zero_input_stays_at_rest(stable_sys):
    log = simulate(stable_sys, Trajectory(np.zeros(50)))
    assert np.all(log.y.values == 0.0)


def test_simulate_rejects_empty_input(stable_sys):
    with pytest.raises(ContractError):
        simulate(stable_sys, Trajectory(np.zeros(0)))


def test_simulate_reports_divergence_with_partial_log():
    sys = LtiStateSpace(A=[[100.0]], b=[1.0], c=[1.0])
    with pytest.raises(DivergenceError) as info:
        simulate(sys, Trajectory(np.ones(50)))
    err = info.value
    assert 0 < err.step < 50
    assert err.log is not None
    assert len(err.log) == err.step


def test_trajectory_preview_holds_final_value():
    traj = Trajectory([1.0, 2.0, 3.0])
    assert traj.at(-1) == 0.0
    assert traj.at(2) == 3.0
    assert traj.at(10) == 3.0


def test_trajectory_rejects_nonpositive_period():
    with pytest.raises(ContractError):
        Trajectory([0.0], period=0.0)


def test_faddeev_leverrier_matches_numpy_poly(rng):
    for n in range(1, 6):
        A = rng.standard_normal((n, n))
        coeffs, terms = faddeev_leverrier(A)
        np.testing.assert_allclose(coeffs, np.poly(A), atol=1e-10)
        assert len(terms) == n


def test_ss_to_tf_on_stable_system(stable_sys):
    tf = ss_to_tf(stable_sys)
    np.testing.assert_allclose(tf.alpha, [0.15, -0.8])
    np.testing.assert_allclose(tf.beta, [-0.2, 1.0])
    assert tf.r == 1


def test_ss_to_tf_on_unstable_system(unstable_sys):
    tf = ss_to_tf(unstable_sys)
    np.testing.assert_allclose(tf.beta, [-450.9, 450.0])


def test_ss_to_tf_zero_output_row():
    with pytest.raises(ZeroTransferFunctionError):
        ss_to_tf(LtiStateSpace(A=[[0.5, 0.0], [0.0, 0.2]], b=[1.0, 1.0], c=[0.0, 0.0]))


def test_tf_to_ss_controllable_canonical_form():
    tf = TransferFunctionModel(alpha=[0.15, -0.8], beta=[-0.2, 1.0])
    sys = tf_to_ss(tf)
    np.testing.assert_allclose(sys.A, [[0.0, 1.0], [-0.15, 0.8]])
    np.testing.assert_allclose(sys.b, [0.0, 1.0])
    np.testing.assert_allclose(sys.c, [-0.2, 1.0])


def test_tf_to_ss_single_delay():
    sys = tf_to_ss(TransferFunctionModel(alpha=[0.0], beta=[1.0]))
    np.testing.assert_allclose(sys.A, [[0.0]])
    np.testing.assert_allclose(sys.c, [1.0])


def test_conversion_preserves_impulse_response(rng):
    for _ in range(10):
        n = int(rng.integers(1, 7))
        sys = random_stable_system(rng, n)
        back = tf_to_ss(ss_to_tf(sys))
        u = np.zeros(30)
        u[0] = 1.0
        y1 = simulate(sys, Trajectory(u)).y.values
        y2 = simulate(back, Trajectory(u)).y.values
        np.testing.assert_allclose(y1, y2, atol=1e-8)


def test_tf_to_ss_to_tf_recovers_coefficients(rng):
    for _ in range(30):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(0, n))
        leading = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
        tf = TransferFunctionModel(
            alpha=rng.uniform(-0.9, 0.9, size=n), beta=np.append(rng.uniform(-2.0, 2.0, size=m), leading)
        )
        back = ss_to_tf(tf_to_ss(tf))
        assert back.r == tf.r == n - m
        np.testing.assert_allclose(back.alpha, tf.alpha, rtol=0.0, atol=1e-12)
        np.testing.assert_allclose(back.beta, tf.beta, rtol=0.0, atol=1e-12)


def test_simulation_is_linear_from_rest(rng):
    for _ in range(10):
        n = int(rng.integers(1, 7))
        sys = random_stable_system(rng, n)
        u1 = rng.uniform(-1.0, 1.0, size=100)
        u2 = rng.uniform(-1.0, 1.0, size=100)
        a, b = rng.uniform(-3.0, 3.0, size=2)
        y1 = simulate(sys, Trajectory(u1)).y.values
        y2 = simulate(sys, Trajectory(u2)).y.values
        combined = simulate(sys, Trajectory(a * u1 + b * u2)).y.values
        np.testing.assert_allclose(combined, a * y1 + b * y2, rtol=0.0, atol=1e-10)


def test_transfer_function_validation():
    with pytest.raises(ContractError):
        TransferFunctionModel(alpha=[0.1], beta=[1.0, 2.0])
    with pytest.raises(ContractError):
        TransferFunctionModel(alpha=[0.1, 0.2], beta=[1.0, 0.0])


def test_run_log_csv_round_trip(tmp_path, stable_sys):
    log = simulate(stable_sys, benchmark_trajectory(40))
    path = log.to_csv(tmp_path / "run.csv")
    back = RunLog.from_csv(path)
    np.testing.assert_array_equal(back.u.values, log.u.values)
    np.testing.assert_array_equal(back.y.values, log.y.values)
    np.testing.assert_array_equal(back.x, log.x)
    assert list(log.to_frame().columns) == ["t", "u", "y", "y_d", "x0", "x1"]


def test_run_log_rejects_ragged_sequences():
    with pytest.raises(ContractError):
        RunLog(u=Trajectory([0.0, 1.0]), y=Trajectory([0.0]), x=np.zeros((2, 1)), y_d=Trajectory([0.0, 1.0]))


def test_pendulum_rests_at_origin(pendulum_sys):
    log = simulate(pendulum_sys, Trajectory(np.zeros(100), 0.02))
    assert np.all(log.y.values == 0.0)


def test_pendulum_unit_step_settles_at_one(pendulum_sys):
    log = simulate(pendulum_sys, step_trajectory(600, 0.02))
    assert log.y.values[-1] == pytest.approx(1.0, abs=1e-4)


def test_scaled_pendulum_settles_at_half(scaled_pendulum_sys):
    log = simulate(scaled_pendulum_sys, step_trajectory(600, 0.02))
    assert log.y.values[-1] == pytest.approx(0.5, abs=1e-4)
    assert scaled_pendulum_sys.name == "pendulum_gamma_0.5"


def test_step_trajectory_raised_cosine_ramp():
    traj = step_trajectory(200, 0.02, amplitude=2.0, start=100, rise_steps=50)
    assert traj.values[99] == 0.0
    assert traj.values[100] == 0.0
    assert traj.values[125] == pytest.approx(1.0)
    assert traj.values[150] == pytest.approx(2.0)
    assert np.all(np.diff(traj.values) >= 0.0)


def test_benchmark_trajectory_starts_at_zero():
    traj = benchmark_trajectory(30)
    assert traj.values[0] == pytest.approx(0.0)
    assert traj.values[15] == pytest.approx(np.sin(2 * np.pi) + np.cos(2 * np.pi * 15 / 12) - 1.0)


def test_two_tone_trajectory_default_tones():
    traj = two_tone_trajectory(100, 0.02)
    t = np.arange(100) * 0.02
    expected = 0.5 * np.sin(2 * np.pi * 0.25 * t) + 0.3 * np.sin(2 * np.pi * 0.13 * t)
    np.testing.assert_allclose(traj.values, expected)
