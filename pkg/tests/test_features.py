import numpy as np
import pytest

from src.errors import ContractError
from src.features import FeatureSpec, apply_difference, balanced_sample, build_dataset, sinusoid_family
from src.nnet import Dataset
from src.plant import LtiStateSpace, Trajectory, TransferFunctionModel, simulate, tf_to_ss
from src.plant.systems import two_tone_trajectory
from src.runner import ExactInversePolicy

BENCHMARK_AMPLITUDES = [1.0, 2.0, 3.0, 4.0, 5.0]
BENCHMARK_FREQUENCIES = [0.024, 0.032, 0.048, 0.091, 1.0]


def random_input_log(sys, rng, steps: int = 80, period: float = 1.0):
    return simulate(sys, Trajectory(rng.uniform(-1.0, 1.0, size=steps), period))


@pytest.mark.parametrize("n, r", [(2, 1), (2, 2), (4, 1), (4, 3), (6, 6)])
def test_input_width_law(n, r):
    assert FeatureSpec("state_space", r=r, n=n).input_width == n + 1
    assert FeatureSpec("transfer_function", r=r, n=n).input_width == 2 * n - r + 1


def test_feature_names():
    assert FeatureSpec("state_space", r=1, n=2).feature_names == ("x0", "x1", "y[t+1]")
    assert FeatureSpec("transfer_function", r=1, n=2).feature_names == ("y[t+1]", "y[t+0]", "y[t-1]", "u[t-1]")
    diff = FeatureSpec("state_space", r=2, n=2, difference=True)
    assert diff.feature_names == ("d_x0", "x1", "d_y[t+2]")


def test_difference_mask():
    np.testing.assert_array_equal(
        FeatureSpec("state_space", r=1, n=2, difference=True).difference_mask(), [True, False, True]
    )
    assert FeatureSpec("transfer_function", r=1, n=2, difference=True).difference_mask().all()


def test_spec_validation():
    with pytest.raises(ContractError):
        FeatureSpec("state_space", r=3, n=2)
    with pytest.raises(ContractError):
        FeatureSpec("transfer_function", r=1, n=2, preview_offsets=(1, 2))
    with pytest.raises(ContractError):
        FeatureSpec("state_space", r=1, n=2, preview_offsets=(0,))
    with pytest.raises(ContractError):
        FeatureSpec("state_space", r=1, n=2, differenced_states=(2,))
    with pytest.raises(ContractError):
        FeatureSpec("polynomial", r=1, n=2)


def test_output_reference_defaults_to_input_side():
    assert FeatureSpec("state_space", r=1, n=2, difference_reference="desired_now").output_reference == "desired_now"
    assert FeatureSpec("state_space", r=1, n=2).output_reference == "actual_now"
    spec = FeatureSpec("state_space", r=1, n=2, difference_reference="actual_now", output_reference="desired_now")
    assert (spec.difference_reference, spec.output_reference) == ("actual_now", "desired_now")
    with pytest.raises(ContractError):
        FeatureSpec("state_space", r=1, n=2, output_reference="previous")
    with pytest.raises(ContractError):
        FeatureSpec("state_space", r=1, n=2, difference_reference="previous")


def test_extra_preview_offsets_widen_state_space_rows(stable_sys, rng):
    spec = FeatureSpec("state_space", r=1, n=2, preview_offsets=(1, 2, 3))
    assert spec.input_width == 5
    assert spec.lookahead == 3
    log = random_input_log(stable_sys, rng, 40)
    dataset = build_dataset(log, spec)
    assert dataset.inputs.shape == (37, 5)
    np.testing.assert_array_equal(dataset.inputs[0, 2:], log.y.values[1:4])


@pytest.mark.parametrize("mode", ["state_space", "transfer_function"])
def test_dataset_rows_agree_with_exact_inverse(stable_sys, rng, mode):
    spec = FeatureSpec(mode, r=1, n=2)
    log = random_input_log(stable_sys, rng)
    dataset = build_dataset(log, spec)
    oracle = ExactInversePolicy(stable_sys, spec)
    for row, target in zip(dataset.inputs, dataset.targets[:, 0]):
        assert oracle.forward(row)[0] == pytest.approx(target, abs=1e-9)


def test_dataset_rows_agree_with_exact_inverse_on_pendulum(pendulum_sys):
    spec = FeatureSpec("state_space", r=2, n=2)
    log = simulate(pendulum_sys, two_tone_trajectory(300, 0.02))
    dataset = build_dataset(log, spec)
    assert len(dataset) == 298
    oracle = ExactInversePolicy(pendulum_sys, spec)
    for row, target in zip(dataset.inputs, dataset.targets[:, 0]):
        assert oracle.forward(row)[0] == pytest.approx(target, abs=1e-9)


def test_transfer_function_rows_drop_incomplete_windows(rng):
    # n=3, r=1: 两步 u 历史，一步预览
    sys = tf_to_ss(TransferFunctionModel(alpha=[0.1, 0.2, 0.3], beta=[0.5, -0.1, 1.0]))
    spec = FeatureSpec("transfer_function", r=1, n=3)
    log = random_input_log(sys, rng, 30)
    dataset = build_dataset(log, spec)
    assert len(dataset) == 30 - 2 - 1
    first = dataset.inputs[0]
    np.testing.assert_array_equal(first[:4], log.y.values[[3, 2, 1, 0]])
    np.testing.assert_array_equal(first[4:], log.u.values[[1, 0]])
    assert dataset.targets[0, 0] == log.u.values[2]


def test_build_dataset_rejects_short_logs(stable_sys):
    log = simulate(stable_sys, Trajectory(np.ones(3)))
    with pytest.raises(ContractError):
        build_dataset(log, FeatureSpec("state_space", r=1, n=2))


def test_constant_run_gives_zero_difference_rows():
    tf = TransferFunctionModel(alpha=[0.15, -0.8], beta=[-0.2, 0.55])
    sys = tf_to_ss(tf)
    x_rest = np.linalg.solve(np.eye(2) - sys.A, sys.b)
    log = simulate(sys, Trajectory(np.ones(40)), x0=x_rest)
    np.testing.assert_allclose(log.y.values, 1.0, atol=1e-12)
    dataset = build_dataset(log, FeatureSpec("transfer_function", r=1, n=2, difference=True))
    np.testing.assert_allclose(dataset.inputs, 0.0, atol=1e-12)
    np.testing.assert_allclose(dataset.targets, 0.0, atol=1e-12)


def test_difference_rows_are_translation_invariant(rng):
    spec = FeatureSpec("state_space", r=1, n=2, difference=True)
    inputs = rng.standard_normal((10, 3))
    targets = rng.standard_normal(10)
    refs = rng.standard_normal(10)
    shift = 3.7
    mask = spec.difference_mask()
    moved = inputs.copy()
    moved[:, mask] += shift
    a_in, a_out = apply_difference(inputs, targets, refs, spec)
    b_in, b_out = apply_difference(moved, targets + shift, refs + shift, spec)
    np.testing.assert_allclose(b_in, a_in, atol=1e-12)
    np.testing.assert_allclose(b_out, a_out, atol=1e-12)
    # 未做差分的状态列保持原值
    np.testing.assert_array_equal(a_in[:, 1], inputs[:, 1])


def test_apply_difference_requires_difference_spec():
    with pytest.raises(ContractError):
        apply_difference(np.zeros((1, 3)), None, np.zeros(1), FeatureSpec("state_space", r=1, n=2))


def test_difference_targets_subtract_current_output(stable_sys, rng):
    log = random_input_log(stable_sys, rng)
    plain = build_dataset(log, FeatureSpec("state_space", r=1, n=2))
    diff = build_dataset(log, FeatureSpec("state_space", r=1, n=2, difference=True))
    y_now = log.y.values[: len(plain)]
    np.testing.assert_allclose(diff.targets[:, 0], plain.targets[:, 0] - y_now)
    np.testing.assert_allclose(diff.inputs[:, 2], plain.inputs[:, 2] - y_now)


def test_sinusoid_family_constant_zero():
    (traj,) = sinusoid_family([1.0], [0.0], 0.5, 20)
    np.testing.assert_array_equal(traj.values, np.zeros(20))
    assert traj.period == 0.5


def test_sinusoid_family_quarter_cycle():
    (traj,) = sinusoid_family([2.0], [0.25], 1.0, 8)
    np.testing.assert_allclose(traj.values, [0.0, 2.0, 0.0, -2.0, 0.0, 2.0, 0.0, -2.0], atol=1e-12)


def test_sinusoid_family_order_and_size():
    family = sinusoid_family(BENCHMARK_AMPLITUDES, BENCHMARK_FREQUENCIES, 1.0, 100)
    assert len(family) == 25
    t = np.arange(100.0)
    np.testing.assert_allclose(family[1].values, 1.0 * np.sin(2.0 * np.pi * 0.032 * t))
    np.testing.assert_allclose(family[5].values, 2.0 * np.sin(2.0 * np.pi * 0.024 * t))


def test_sinusoid_family_rejects_empty_lists():
    with pytest.raises(ContractError):
        sinusoid_family([], [0.1], 1.0, 10)


def test_balanced_sample_of_whole_source_is_permutation(rng):
    source = Dataset(rng.standard_normal((20, 2)), np.arange(20.0))
    sample = balanced_sample([source], 20, seed=4)
    assert sorted(sample.targets[:, 0]) == list(np.arange(20.0))


def test_balanced_sample_sizes_and_determinism(rng):
    sources = [Dataset(rng.standard_normal((250, 3)), rng.standard_normal(250)) for _ in range(25)]
    first = balanced_sample(sources, 200, seed=1)
    second = balanced_sample(sources, 200, seed=1)
    assert len(first) == 5000
    np.testing.assert_array_equal(first.inputs, second.inputs)
    np.testing.assert_array_equal(first.targets, second.targets)


def test_balanced_sample_rejects_small_source(rng):
    with pytest.raises(ContractError):
        balanced_sample([Dataset(np.zeros((5, 1)), np.zeros(5))], 6, seed=0)


def test_state_space_mode_checks_log_state_width(rng):
    sys = LtiStateSpace(A=[[0.5]], b=[1.0], c=[1.0])
    log = random_input_log(sys, rng, 20)
    with pytest.raises(ContractError):
        build_dataset(log, FeatureSpec("state_space", r=1, n=2))
