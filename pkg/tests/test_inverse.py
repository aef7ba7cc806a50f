import numpy as np
import pytest

from src.errors import ContractError, RelativeDegreeError
from src.inverse import (
    StateSpaceInverse,
    TransferFunctionInverse,
    exact_inverse_affine_nonlinear,
    exact_inverse_diff,
    exact_inverse_ss,
    exact_inverse_tf,
    steady_state_term,
)
from src.plant import Trajectory, TransferFunctionModel, simulate, ss_to_tf, tf_to_ss
from src.plant.systems import benchmark_trajectory, two_tone_trajectory
from src.sysid import dc_gain, relative_degree_lti

from .conftest import random_minimum_phase_system


def stable_tf() -> TransferFunctionModel:
    return TransferFunctionModel(alpha=[0.15, -0.8], beta=[-0.2, 1.0])


def random_stable_tf(rng: np.random.Generator) -> TransferFunctionModel:
    n = int(rng.integers(1, 6))
    den = np.poly(rng.uniform(-0.8, 0.8, size=n))
    # 零点也在单位圆内，逆系统稳定
    # 无零点时 np.poly 返回标量
    num = np.atleast_1d(np.poly(rng.uniform(-0.8, 0.8, size=int(rng.integers(0, n)))))
    gain = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
    return TransferFunctionModel(alpha=den[1:][::-1], beta=(num * gain)[::-1])


@pytest.mark.parametrize(
    "x, yd_future, expected",
    [
        ([0.0, 0.0], 1.0, 1.0),
        ([1.0, 1.0], 0.0, -0.45),
        ([0.0, 0.0], 0.0, 0.0),
    ],
)
def test_state_space_inverse_examples(stable_sys, x, yd_future, expected):
    assert exact_inverse_ss(stable_sys, 1, np.array(x), yd_future) == pytest.approx(expected, abs=1e-15)


def test_state_space_inverse_caches_rows(stable_sys):
    inv = StateSpaceInverse(stable_sys, 1)
    assert inv.gain == pytest.approx(1.0)
    np.testing.assert_allclose(inv.free_response, [-0.15, 0.6])


def test_state_space_inverse_rejects_wrong_degree(stable_sys):
    with pytest.raises(ContractError):
        StateSpaceInverse(stable_sys, 0)
    with pytest.raises(ContractError):
        StateSpaceInverse(stable_sys, 3)
    sys = tf_to_ss(TransferFunctionModel(alpha=[0.0, 0.15, -0.8], beta=[-0.2, 1.0]))
    with pytest.raises(RelativeDegreeError):
        StateSpaceInverse(sys, 1)


def test_transfer_function_inverse_fixed_point():
    u = exact_inverse_tf(stable_tf(), [1.0, 1.0, 1.0], [0.4375])
    assert u == pytest.approx(0.4375, abs=1e-15)
    assert u == pytest.approx(1.0 / dc_gain(stable_tf()))


def test_transfer_function_inverse_of_zero_windows():
    assert exact_inverse_tf(stable_tf(), np.zeros(3), np.zeros(1)) == 0.0


def test_transfer_function_inverse_window_lengths():
    with pytest.raises(ContractError, match="y_d window"):
        exact_inverse_tf(stable_tf(), [1.0, 1.0], [0.0])
    with pytest.raises(ContractError, match="u history"):
        exact_inverse_tf(stable_tf(), [1.0, 1.0, 1.0], [0.0, 0.0])


def test_inversion_reproduces_recorded_input(stable_sys, rng):
    u = Trajectory(rng.uniform(-1.0, 1.0, size=120))
    log = simulate(stable_sys, u)
    inv = TransferFunctionInverse(ss_to_tf(stable_sys))
    for t in range(len(log) - 1):
        assert inv.step(log.y, t) == pytest.approx(log.u.values[t], abs=1e-9)


def test_inversion_round_trip_on_random_systems(rng):
    for _ in range(20):
        tf = random_stable_tf(rng)
        sys = tf_to_ss(tf)
        u = Trajectory(rng.uniform(-1.0, 1.0, size=60))
        log = simulate(sys, u)
        inv = TransferFunctionInverse(tf)
        for t in range(len(log) - tf.r):
            assert inv.step(log.y, t) == pytest.approx(log.u.values[t], abs=1e-8)


def test_state_space_and_transfer_function_inverses_agree(stable_sys, rng):
    log = simulate(stable_sys, Trajectory(rng.uniform(-1.0, 1.0, size=80)))
    ss_inv = StateSpaceInverse(stable_sys, 1)
    tf_inv = TransferFunctionInverse(ss_to_tf(stable_sys))
    for t in range(len(log) - 1):
        u_ss = ss_inv(log.x[t], log.y.values[t + 1])
        assert tf_inv.step(log.y, t) == pytest.approx(u_ss, abs=1e-9)


def test_transfer_function_inverse_without_history():
    inv = TransferFunctionInverse(TransferFunctionModel(alpha=[0.5], beta=[2.0]))
    assert inv.history().size == 0
    # 2 u(t) = y_d(t+1) + 0.5 y_d(t)
    assert inv.step(Trajectory([1.0, 3.0]), 0) == pytest.approx(1.75)


@pytest.mark.parametrize("yd_now, expected", [(1.0, -0.45), (2.0, -0.9), (0.0, 0.0)])
def test_steady_state_term_examples(yd_now, expected):
    assert steady_state_term(stable_tf(), yd_now) == pytest.approx(expected, abs=1e-15)


def test_steady_state_term_vanishes_iff_unity_dc_gain(rng):
    for k in range(100):
        tf = random_stable_tf(rng)
        if k % 2 == 0:
            gain = dc_gain(tf)
            tf = TransferFunctionModel(alpha=tf.alpha, beta=tf.beta / gain)
        gain = dc_gain(tf)
        s = steady_state_term(tf, 1.0)
        den_at_one = 1.0 + tf.alpha.sum()
        # Σβ - (1 + Σα) = (G(1) - 1)(1 + Σα)
        assert s == pytest.approx((1.0 - gain) * den_at_one / tf.leading, rel=1e-9, abs=1e-10)
        if k % 2 == 0:
            assert abs(s) < 1e-9
        elif abs(gain - 1.0) > 1e-6:
            assert abs(s) > 1e-12


def test_difference_form_recovers_absolute_input(rng):
    tf = stable_tf()
    for _ in range(20):
        window = rng.standard_normal(3)
        history = rng.standard_normal(1)
        yd_now = float(window[1])
        du, s = exact_inverse_diff(tf, window - yd_now, history - yd_now, yd_now)
        assert du + s + yd_now == pytest.approx(exact_inverse_tf(tf, window, history), abs=1e-12)


def test_difference_form_is_translation_invariant_at_unity_gain(rng):
    tf = TransferFunctionModel(alpha=[0.15, -0.8], beta=[-0.2, 0.55])
    assert dc_gain(tf) == pytest.approx(1.0)
    window = rng.standard_normal(3)
    history = rng.standard_normal(1)
    yd_now = float(window[1])
    first, s_first = exact_inverse_diff(tf, window - yd_now, history - yd_now, yd_now)
    second, s_second = exact_inverse_diff(tf, window - yd_now, history - yd_now, yd_now + 5.0)
    assert first == second
    assert s_first == pytest.approx(0.0, abs=1e-15)
    assert s_second == pytest.approx(0.0, abs=1e-14)


def test_exact_inverse_tracks_stable_system(stable_sys):
    y_d = benchmark_trajectory(300)
    inv = StateSpaceInverse(stable_sys, 1)
    x = np.zeros(2)
    for t in range(len(y_d) - 1):
        u = inv(x, y_d.at(t + 1))
        x = stable_sys.A @ x + stable_sys.b * u
        assert float(stable_sys.c @ x) == pytest.approx(y_d.at(t + 1), abs=1e-9)


def test_exact_inverse_input_diverges_on_non_minimum_phase_system(unstable_sys):
    y_d = benchmark_trajectory(5000)
    inv = StateSpaceInverse(unstable_sys, 1)
    x = np.zeros(2)
    diverged_at = None
    for t in range(len(y_d) - 1):
        u = inv(x, y_d.at(t + 1))
        if abs(u) > 1e3:
            diverged_at = t
            break
        x = unstable_sys.A @ x + unstable_sys.b * u
    assert diverged_at is not None
    assert diverged_at > 100


def test_affine_inverse_identity_plant():
    u = exact_inverse_affine_nonlinear(lambda x: 0.0, lambda x: 1.0, np.zeros(2), 0.7)
    assert u == pytest.approx(0.7)


def test_affine_inverse_rejects_vanishing_gain():
    with pytest.raises(RelativeDegreeError, match="relative degree lost at state"):
        exact_inverse_affine_nonlinear(lambda x: 0.0, lambda x: 1e-13, np.array([0.1, 0.2]), 1.0)


def test_affine_inverse_tracks_pendulum(pendulum_sys):
    hhat, D = pendulum_sys.inverse_maps
    y_d = two_tone_trajectory(400, 0.02)
    x = np.zeros(2)
    states = [x]
    for t in range(len(y_d) - 2):
        u = exact_inverse_affine_nonlinear(hhat, D, x, y_d.at(t + 2))
        x = pendulum_sys.step(x, u)
        states.append(x)
        if t >= 1:
            assert pendulum_sys.output(states[t + 1]) == pytest.approx(y_d.at(t + 1), abs=1e-10)


def test_random_stable_tf_covers_pure_delay(rng):
    orders = set()
    for _ in range(60):
        tf = random_stable_tf(rng)
        assert tf.beta.ndim == 1
        orders.add(tf.r == tf.n)
    assert orders == {True, False}


@pytest.mark.parametrize("n", range(1, 7))
def test_exact_inverse_tracks_random_minimum_phase_systems(rng, n):
    y_d = benchmark_trajectory(200)
    for _ in range(5):
        sys = random_minimum_phase_system(rng, n)
        r = relative_degree_lti(sys)
        inv = StateSpaceInverse(sys, r)
        x = np.zeros(n)
        ys = [float(sys.c @ x)]
        for t in range(len(y_d) - 1):
            x = sys.A @ x + sys.b * inv(x, y_d.at(t + r))
            ys.append(float(sys.c @ x))
        err = np.abs(np.array(ys[r:]) - y_d.values[r:])
        assert np.max(err) < 1e-9
