"""Training and inference loops plus confrontation bookkeeping.

A "confrontation" is a critical instant: a timeslot where the sensing
device's next mode hinges on the jamming outcome. Success is counted per
mode occurrence (each time the device enters a mode opens a new occurrence)
as the percentage of confrontations the jammer won, i.e. rates how reliably
jamming holds the device back exactly when it matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agent import (
    PolicyNetwork,
    ValueNetwork,
    advantage_estimate,
    sample_action,
)
from .config import RunConfig
from .env import (
    HopSchedule,
    ModeMachine,
    RewardConfig,
    SensingMode,
    SpectrumSim,
    channel_of,
    hop_frequency,
    mode_transition,
    one_hot,
)
from .shield import ConstraintModel, Shield, baseline_constraint


class NoConfrontationsError(ValueError):
    """Success rate requested for a mode occurrence with no confrontations."""


def is_critical_instant(machine: ModeMachine) -> bool:
    """Whether the next detection outcome can change the device's mode."""
    if machine.mode is SensingMode.LOCK_ON:
        return False
    return (
        mode_transition(machine, True).mode is not machine.mode
        or mode_transition(machine, False).mode is not machine.mode
    )


@dataclass
class ModeOccurrence:
    """One stretch of consecutive slots the device spends in a mode."""

    mode: SensingMode
    confrontations: int = 0
    wins: int = 0


class ConfrontationLedger:
    """Confrontation counts per mode occurrence, in entry order."""

    def __init__(self):
        self.occurrences: list[ModeOccurrence] = []

    def enter_mode(self, mode: SensingMode):
        self.occurrences.append(ModeOccurrence(mode))

    def record(self, won: bool):
        if not self.occurrences:
            raise ValueError("no mode occurrence open")
        occ = self.occurrences[-1]
        occ.confrontations += 1
        occ.wins += int(won)

    def overall_percent(self) -> float:
        """Win percentage pooled over every occurrence.

        A run with no confrontations at all never gave the device a chance
        to escalate, which counts as full success (100.0).
        """
        total = sum(o.confrontations for o in self.occurrences)
        if total == 0:
            return 100.0
        return 100.0 * sum(o.wins for o in self.occurrences) / total


def success_rate(ledger: ConfrontationLedger, m: int) -> float:
    """Win percentage for the m-th mode occurrence (1-based)."""
    if not 1 <= m <= len(ledger.occurrences):
        raise IndexError(f"no mode occurrence {m}")
    occ = ledger.occurrences[m - 1]
    if occ.confrontations == 0:
        raise NoConfrontationsError(f"mode occurrence {m} saw no confrontations")
    return 100.0 * occ.wins / occ.confrontations


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

TRACE_FORMAT_VERSION = 1


@dataclass
class TraceRow:
    """One executed timeslot."""

    step: int  # 1-based position in the whole phase
    episode: int
    slot: int  # execution timeslot on the episode clock
    proposed_channel: int
    executed_channel: int
    corrected: bool
    sensing_channel: int
    user_channel: int
    jam_hit: bool
    conflict: bool
    critical: bool
    won: bool | None  # None on non-critical slots
    reward: float
    mode_code: int  # device mode after the slot
    cumulative_conflicts: int


@dataclass
class RunTrace:
    """Complete record of a training or inference phase."""

    phase: str
    shield_on: bool
    seed: int
    num_channels: int
    rows: list[TraceRow] = field(default_factory=list)
    ledger: ConfrontationLedger = field(default_factory=ConfrontationLedger)

    def total_conflicts(self) -> int:
        return self.rows[-1].cumulative_conflicts if self.rows else 0

    def mode_fraction(self, code: int) -> float:
        if not self.rows:
            return 0.0
        return sum(r.mode_code == code for r in self.rows) / len(self.rows)

    def to_payload(self) -> dict:
        return {
            "format_version": TRACE_FORMAT_VERSION,
            "phase": self.phase,
            "shield": self.shield_on,
            "seed": self.seed,
            "channels": self.num_channels,
            "rows": [vars(r).copy() for r in self.rows],
            "occurrences": [
                {"mode": o.mode.value, "confrontations": o.confrontations, "wins": o.wins}
                for o in self.ledger.occurrences
            ],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "RunTrace":
        version = payload.get("format_version")
        if version != TRACE_FORMAT_VERSION:
            raise ValueError(f"unsupported trace format_version: {version!r}")
        trace = cls(
            phase=payload["phase"],
            shield_on=payload["shield"],
            seed=payload["seed"],
            num_channels=payload["channels"],
        )
        trace.rows = [TraceRow(**row) for row in payload["rows"]]
        for occ in payload["occurrences"]:
            entry = ModeOccurrence(SensingMode(occ["mode"]))
            entry.confrontations = occ["confrontations"]
            entry.wins = occ["wins"]
            trace.ledger.occurrences.append(entry)
        return trace


# ---------------------------------------------------------------------------
# shared rollout plumbing
# ---------------------------------------------------------------------------


def build_schedules(config: RunConfig) -> tuple[HopSchedule, HopSchedule]:
    sensor = HopSchedule(config.sensor_slope, config.sensor_intercept, config.channels)
    user = HopSchedule(config.user_slope, config.user_intercept, config.channels)
    return sensor, user


def build_sim(config: RunConfig) -> SpectrumSim:
    sensor, user = build_schedules(config)
    rewards = RewardConfig(
        hit=config.reward_hit,
        miss=config.reward_miss,
        escalation=config.reward_escalation,
        deescalation=config.reward_deescalation,
    )
    return SpectrumSim(
        sensor_schedule=sensor,
        user_schedule=user,
        rewards=rewards,
        reset_on_change=config.window_reset_on_transition,
    )


class TransitionBuffer:
    """Bounded transition store holding a uniform sample of the stream.

    Standard reservoir sampling: once full, the i-th arrival replaces a
    random slot with probability capacity/i. Deterministic admission
    lattices are a trap here — the environment is periodic, so any stride
    shared with the hop period silently filters the buffer down to a few
    clock phases and the constraint fit never sees the rest of the state
    space.
    """

    def __init__(self, capacity: int, rng: np.random.Generator):
        self.capacity = capacity
        self.rng = rng
        self.seen = 0
        self.items: list = []

    def add(self, item):
        self.seen += 1
        if len(self.items) < self.capacity:
            self.items.append(item)
            return
        slot = int(self.rng.integers(self.seen))
        if slot < self.capacity:
            self.items[slot] = item


@dataclass
class SafetyContext:
    """Capture of the occupancy facts a shield decision was based on."""

    state_encoding: np.ndarray
    action: np.ndarray
    baseline: np.ndarray


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    policy: PolicyNetwork
    critic: ValueNetwork
    constraint: ConstraintModel
    trace: RunTrace
    rng: np.random.Generator
    episodes_trained: int
    buffer: TransitionBuffer


def run_training(
    config: RunConfig,
    policy: PolicyNetwork | None = None,
    critic: ValueNetwork | None = None,
    constraint: ConstraintModel | None = None,
    rng: np.random.Generator | None = None,
) -> TrainResult:
    """Train actor, critic and constraint model for ``config.train_episodes``.

    One learning step per executed slot: sample an action from the policy,
    screen it when the shield is on, execute, then update actor and critic
    with the one-step advantage. Slots where the shield replaced the action
    are excluded from actor/critic updates (the executed transition no
    longer reflects the policy) unless ``learn_on_corrected`` is set. The
    constraint model trains on every executed transition, refit every
    ``constraint_train_every`` episodes.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if policy is None:
        policy = PolicyNetwork(config.channels, config.hidden_size, rng)
    if critic is None:
        critic = ValueNetwork(config.channels, config.hidden_size, rng)
    if constraint is None:
        constraint = ConstraintModel(config.channels, config.hidden_size, rng)

    sim = build_sim(config)
    shield = Shield(constraint, config.decision_margin) if config.shield else None
    gamma = 1.0 if config.undiscounted_advantage else config.discount
    buffer = TransitionBuffer(config.constraint_buffer, rng)
    trace = RunTrace(
        phase="train",
        shield_on=config.shield,
        seed=config.seed,
        num_channels=config.channels,
    )

    global_step = 0
    cumulative_conflicts = 0
    for episode in range(1, config.train_episodes + 1):
        state = sim.reset()
        trace.ledger.enter_mode(sim.machine.mode)
        for _ in range(config.episode_length):
            encoded = state.encode()
            probs = policy.probabilities(encoded)
            proposed = sample_action(probs, rng)
            if shield is not None:
                decision = shield.screen(state, proposed)
                executed, corrected = decision.executed, decision.corrected
            else:
                executed, corrected = proposed, False

            critical = is_critical_instant(sim.machine)
            outcome = sim.step(executed)
            won = (not _escalated(outcome)) if critical else None
            if critical:
                trace.ledger.record(won)
            if outcome.mode_after is not outcome.mode_before:
                trace.ledger.enter_mode(outcome.mode_after)

            buffer.add(
                (
                    encoded,
                    executed.copy(),
                    baseline_constraint(state),
                    baseline_constraint(outcome.next_state),
                )
            )

            if (not corrected) or config.learn_on_corrected:
                value = critic.value(encoded)
                next_value = critic.value(outcome.next_state.encode())
                adv = advantage_estimate(
                    outcome.reward, next_value, value, gamma, outcome.terminal
                )
                critic.update(encoded, adv, config.critic_lr)
                policy.update(
                    [(encoded, channel_of(executed), adv)], config.actor_lr
                )

            global_step += 1
            cumulative_conflicts += int(outcome.conflict)
            trace.rows.append(
                _make_row(
                    global_step,
                    episode,
                    sim.t,
                    proposed,
                    executed,
                    corrected,
                    outcome,
                    critical,
                    won,
                    cumulative_conflicts,
                )
            )

            state = outcome.next_state
            if outcome.terminal:
                break

        if episode % config.constraint_train_every == 0 and buffer.items:
            _fit_constraint(constraint, buffer, config)

    if config.train_episodes % config.constraint_train_every != 0 and buffer.items:
        _fit_constraint(constraint, buffer, config)

    return TrainResult(
        policy=policy,
        critic=critic,
        constraint=constraint,
        trace=trace,
        rng=rng,
        episodes_trained=config.train_episodes,
        buffer=buffer,
    )


def _fit_constraint(constraint: ConstraintModel, buffer: TransitionBuffer, config):
    encodings = np.stack([item[0] for item in buffer.items])
    actions = np.stack([item[1] for item in buffer.items])
    baselines = np.stack([item[2] for item in buffer.items])
    targets = np.stack([item[3] for item in buffer.items])
    constraint.fit(
        encodings,
        actions,
        baselines,
        targets,
        config.constraint_epochs,
        config.constraint_lr,
    )


def _escalated(outcome) -> bool:
    return outcome.mode_after.value > outcome.mode_before.value


def _make_row(
    step,
    episode,
    slot,
    proposed,
    executed,
    corrected,
    outcome,
    critical,
    won,
    cumulative_conflicts,
) -> TraceRow:
    return TraceRow(
        step=step,
        episode=episode,
        slot=slot,
        proposed_channel=channel_of(proposed),
        executed_channel=channel_of(executed),
        corrected=bool(corrected),
        sensing_channel=outcome.next_state.sensing_freq,
        user_channel=outcome.next_state.user_freq,
        jam_hit=bool(outcome.jam_hit),
        conflict=bool(outcome.conflict),
        critical=bool(critical),
        won=won,
        reward=float(outcome.reward),
        mode_code=outcome.mode_after.value,
        cumulative_conflicts=cumulative_conflicts,
    )


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------


def run_inference(
    policy: PolicyNetwork,
    constraint: ConstraintModel,
    config: RunConfig,
) -> RunTrace:
    """Run the greedy policy for ``config.eval_timeslots`` executed slots.

    Fully deterministic: the policy takes its most probable channel and the
    shield (when on) screens it. A lock-on restarts the confrontation in a
    fresh episode.
    """
    sim = build_sim(config)
    shield = Shield(constraint, config.decision_margin) if config.shield else None
    trace = RunTrace(
        phase="eval",
        shield_on=config.shield,
        seed=config.seed,
        num_channels=config.channels,
    )

    episode = 1
    state = sim.reset()
    trace.ledger.enter_mode(sim.machine.mode)
    cumulative_conflicts = 0
    for step in range(1, config.eval_timeslots + 1):
        proposed = one_hot(policy.greedy_channel(state.encode()), config.channels)
        if shield is not None:
            decision = shield.screen(state, proposed)
            executed, corrected = decision.executed, decision.corrected
        else:
            executed, corrected = proposed, False

        critical = is_critical_instant(sim.machine)
        outcome = sim.step(executed)
        won = (not _escalated(outcome)) if critical else None
        if critical:
            trace.ledger.record(won)
        if outcome.mode_after is not outcome.mode_before:
            trace.ledger.enter_mode(outcome.mode_after)

        cumulative_conflicts += int(outcome.conflict)
        trace.rows.append(
            _make_row(
                step,
                episode,
                sim.t,
                proposed,
                executed,
                corrected,
                outcome,
                critical,
                won,
                cumulative_conflicts,
            )
        )

        state = outcome.next_state
        if outcome.terminal:
            episode += 1
            state = sim.reset()
            trace.ledger.enter_mode(sim.machine.mode)

    return trace


# ---------------------------------------------------------------------------
# reference play
# ---------------------------------------------------------------------------


def safe_optimal_channel(
    sensor: HopSchedule, user: HopSchedule, t: int
) -> int | None:
    """Best safe jam channel chosen at slot t, or None to stand down.

    Jamming the sensing device's next channel blocks detection; when that
    channel is also the user's next channel there is no winning safe move,
    so the reference play defers (any channel other than the user's).
    """
    sensing_next = hop_frequency(sensor, t + 1)
    user_next = hop_frequency(user, t + 1)
    return None if sensing_next == user_next else sensing_next


def oracle_agreement(trace: RunTrace) -> float:
    """Fraction of trace slots whose executed action matches reference play.

    On collision slots any deferral (a channel clear of the user) agrees.
    """
    if not trace.rows:
        return 0.0
    agree = 0
    for row in trace.rows:
        if row.sensing_channel == row.user_channel:
            agree += row.executed_channel != row.user_channel
        else:
            agree += row.executed_channel == row.sensing_channel
    return agree / len(trace.rows)
