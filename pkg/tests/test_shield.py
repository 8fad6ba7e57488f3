import numpy as np
import pytest

from safejam.env import HopSchedule, RewardConfig, SensingMode, SpectrumSim, one_hot
from safejam.shield import (
    CONSTRAINT_LIMIT,
    EPS_SENSITIVITY,
    ConstraintModel,
    DegenerateSensitivityError,
    Shield,
    baseline_constraint,
    correct_action,
    lagrange_multiplier,
    predict_constraint,
    project_to_onehot,
    train_constraint_model,
)
from safejam.env import SpectrumState, ModeMachine


def make_state(prev_channel, sensing, user, mode=SensingMode.SEARCHING, n=8):
    return SpectrumState(
        prev_action=one_hot(prev_channel, n),
        sensing_freq=sensing,
        user_freq=user,
        sensing_mode=mode,
    )


def collect_transitions(count, seed=0):
    sensor = HopSchedule(slope=1, intercept=0, num_channels=8)
    user = HopSchedule(slope=-1, intercept=8, num_channels=8)
    sim = SpectrumSim(sensor_schedule=sensor, user_schedule=user, rewards=RewardConfig())
    rng = np.random.default_rng(seed)
    out_list = []
    state = sim.reset()
    steps = 0
    while len(out_list) < count:
        action = one_hot(int(rng.integers(1, 9)), 8)
        out = sim.step(action)
        out_list.append((state, action, out.next_state))
        state = out.next_state
        steps += 1
        if out.terminal or steps % 64 == 0:
            state = sim.reset()
    return out_list


def test_baseline_counts_prev_action_and_user():
    b = baseline_constraint(make_state(3, sensing=1, user=5))
    assert b[2] == 1 and b[4] == 1 and b.sum() == 2


def test_baseline_doubles_when_last_slot_conflicted():
    b = baseline_constraint(make_state(5, sensing=1, user=5))
    assert b[4] == 2 and b.sum() == 2


def test_baseline_edge_channels():
    b = baseline_constraint(make_state(1, sensing=2, user=8))
    assert np.array_equal(b, np.array([1, 0, 0, 0, 0, 0, 0, 1], dtype=float))


def test_prediction_without_action_term_is_the_baseline():
    model = ConstraintModel(8, 64, np.random.default_rng(0))
    model.net.w2[:] = np.random.default_rng(1).normal(size=model.net.w2.shape)
    state = make_state(2, sensing=4, user=7)
    values, violated = predict_constraint(model, state, np.zeros(8))
    assert np.allclose(values, baseline_constraint(state))


def test_untrained_model_predicts_the_baseline_for_any_action():
    # fresh model has a zero readout: prediction == baseline even when acting
    model = ConstraintModel(8, 64, np.random.default_rng(2))
    state = make_state(2, sensing=4, user=7)
    values, violated = predict_constraint(model, state, one_hot(7, 8))
    assert np.allclose(values, baseline_constraint(state))


def test_violation_flag_uses_the_raw_limit():
    model = ConstraintModel(8, 64, np.random.default_rng(3))
    state = make_state(6, sensing=1, user=6)  # baseline 2 on channel 6
    values, violated = predict_constraint(model, state, np.zeros(8))
    assert violated  # 2 > 1 with no action at all


def test_trained_model_flags_the_users_next_channel():
    transitions = collect_transitions(2000)
    model = ConstraintModel(8, 64, np.random.default_rng(4))
    train_constraint_model(model, transitions, epochs=200, lr=0.01)
    # user hops downward: from a state with user on channel u, the next
    # channel is u-1 (wrapping). Jamming it must be predicted as a violation.
    state = make_state(1, sensing=3, user=5)
    user_next = 4
    values, violated = predict_constraint(model, state, one_hot(user_next, 8))
    assert values[user_next - 1] > 1.0
    assert violated


def test_constraint_fit_reaches_spec_accuracy():
    transitions = collect_transitions(2000)
    model = ConstraintModel(8, 64, np.random.default_rng(5))
    train_constraint_model(model, transitions, epochs=200, lr=0.01)
    enc = np.stack([s.encode() for s, _, _ in transitions])
    act = np.stack([a for _, a, _ in transitions])
    base = np.stack([baseline_constraint(s) for s, _, _ in transitions])
    tgt = np.stack([baseline_constraint(ns) for _, _, ns in transitions])
    assert model.action_channel_mse(enc, act, base, tgt) < 0.05


def test_loss_floor_is_positive_on_actionless_batches():
    model = ConstraintModel(8, 64, np.random.default_rng(6))
    state_a = make_state(1, sensing=2, user=3)
    state_b = make_state(4, sensing=3, user=2)  # different baseline
    enc = np.stack([state_a.encode()])
    act = np.zeros((1, 8))
    base = np.stack([baseline_constraint(state_a)])
    tgt = np.stack([baseline_constraint(state_b)])
    loss, grads = model.loss_and_grads(enc, act, base, tgt)
    assert loss > 0
    for key in grads:
        assert np.all(grads[key] == 0)  # nothing reducible: k multiplies zero


def test_fit_loss_is_nonincreasing_on_a_fixed_batch():
    transitions = collect_transitions(500, seed=9)
    model = ConstraintModel(8, 64, np.random.default_rng(7))
    losses = train_constraint_model(model, transitions, epochs=120, lr=0.01)
    worst_rise = max(b - a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]
    assert worst_rise < 0.05  # learning-rate noise only, no divergence


def test_lagrange_multiplier_examples():
    assert lagrange_multiplier(1.0, 1.0, 1.0) == 1.0
    assert lagrange_multiplier(2.0, 0.0, 0.5) == 0.0
    assert abs(lagrange_multiplier(0.5, 1.0, 0.8) - 1.2) < 1e-12


def test_lagrange_multiplier_rejects_degenerate_sensitivity():
    with pytest.raises(DegenerateSensitivityError):
        lagrange_multiplier(0.0, 1.0, 1.0)
    with pytest.raises(DegenerateSensitivityError):
        lagrange_multiplier(EPS_SENSITIVITY / 2, 1.0, 1.0)


def test_correction_zeroes_a_unit_violation():
    action = one_hot(4, 8)
    baselines = np.zeros(8)
    baselines[3] = 1.0
    sensitivities = np.ones(8)
    result = correct_action(action, baselines, sensitivities)
    assert result.relaxed[3] == 0.0
    assert result.multipliers[3] == 1.0


def test_feasible_action_passes_through_bit_exact():
    action = one_hot(2, 8)
    baselines = np.zeros(8)
    sensitivities = np.full(8, 0.5)
    result = correct_action(action, baselines, sensitivities)
    assert not result.was_corrected
    assert np.array_equal(result.corrected, action)
    assert np.all(result.multipliers == 0)


def test_correction_is_idempotent():
    rng = np.random.default_rng(10)
    for _ in range(100):
        action = one_hot(int(rng.integers(1, 9)), 8)
        baselines = rng.uniform(0, 2, 8)
        sensitivities = rng.uniform(0.2, 3.0, 8) * rng.choice((-1, 1), 8)
        first = correct_action(action, baselines, sensitivities)
        second = correct_action(first.corrected, baselines, sensitivities)
        if not first.was_corrected:
            assert np.array_equal(first.corrected, action)
        # re-screening the executed action must not move it again: the
        # projection only ever emits channels whose prediction is feasible,
        # unless even the fallback channel is predicted infeasible
        pred = baselines + sensitivities * first.corrected
        if np.all(baselines + sensitivities <= CONSTRAINT_LIMIT + 1e-12) or np.any(
            baselines + sensitivities <= CONSTRAINT_LIMIT
        ):
            assert np.array_equal(second.corrected, first.corrected)


def test_kkt_conditions_hold_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(500):
        action = one_hot(int(rng.integers(1, 9)), 8)
        baselines = rng.uniform(0, 2, 8)
        sensitivities = rng.uniform(0.1, 3.0, 8) * rng.choice((-1, 1), 8)
        result = correct_action(action, baselines, sensitivities)
        assert np.all(result.multipliers >= 0)  # dual feasibility
        slack = baselines + sensitivities * result.relaxed - CONSTRAINT_LIMIT
        assert np.all(np.abs(result.multipliers * slack) < 1e-9)  # slackness


def test_degenerate_channels_are_recorded_and_skipped():
    action = one_hot(1, 8)
    baselines = np.full(8, 1.5)
    sensitivities = np.ones(8)
    sensitivities[2] = 0.0
    result = correct_action(action, baselines, sensitivities)
    assert 2 in result.degenerate_channels
    assert result.multipliers[2] == 0.0


def test_projection_takes_feasible_argmax():
    relaxed = np.array([0.9, 0.05, 0.02, 0, 0, 0, 0, 0])
    predicted = np.full(8, 0.5)
    assert np.array_equal(project_to_onehot(relaxed, predicted), one_hot(1, 8))


def test_projection_skips_infeasible_peak():
    relaxed = np.array([0.9, 0.0, 0.0, 0.0, 0.0, 0.6, 0.0, 0.0])
    predicted = np.full(8, 0.5)
    predicted[0] = 1.8  # peak channel predicted occupied
    assert np.array_equal(project_to_onehot(relaxed, predicted), one_hot(6, 8))


def test_projection_fallback_picks_least_occupied():
    relaxed = np.zeros(8)
    predicted = np.full(8, 1.9)
    predicted[1] = 1.2  # still above the limit, but the least bad
    assert np.array_equal(project_to_onehot(relaxed, predicted), one_hot(2, 8))


def test_projection_breaks_ties_toward_the_emptiest_channel():
    relaxed = np.zeros(8)  # every alternative equally close
    predicted = np.array([0.9, 0.3, 0.7, 0.1, 0.5, 0.8, 0.2, 0.6])
    assert np.array_equal(project_to_onehot(relaxed, predicted), one_hot(4, 8))


def test_shield_screens_conflicts_with_a_trained_model():
    transitions = collect_transitions(2000, seed=12)
    model = ConstraintModel(8, 64, np.random.default_rng(13))
    train_constraint_model(model, transitions, epochs=200, lr=0.01)
    shield = Shield(model)
    state = make_state(1, sensing=3, user=5)
    decision = shield.screen_channel(state, 4)  # user's next channel
    assert decision.corrected
    assert not np.array_equal(decision.executed, one_hot(4, 8))
    safe = shield.screen_channel(state, 7)
    assert not safe.corrected
    assert np.array_equal(safe.executed, one_hot(7, 8))


def test_shield_never_executes_the_users_channel_once_trained():
    transitions = collect_transitions(2000, seed=14)
    model = ConstraintModel(8, 64, np.random.default_rng(15))
    train_constraint_model(model, transitions, epochs=300, lr=0.01)
    shield = Shield(model)
    sensor = HopSchedule(slope=1, intercept=0, num_channels=8)
    user = HopSchedule(slope=-1, intercept=8, num_channels=8)
    sim = SpectrumSim(sensor_schedule=sensor, user_schedule=user, rewards=RewardConfig())
    rng = np.random.default_rng(16)
    state = sim.reset()
    conflicts = 0
    for step in range(2000):
        decision = shield.screen_channel(state, int(rng.integers(1, 9)))
        out = sim.step(decision.executed)
        conflicts += int(out.conflict)
        state = out.next_state
        if out.terminal or (step + 1) % 64 == 0:
            state = sim.reset()
    assert conflicts == 0
