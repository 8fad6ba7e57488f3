"""Spectrum confrontation environment.

Simulates one jammer facing a frequency-agile multifunction sensing device
while a non-cooperative user hops over the same band. Everything here is
deterministic: hop schedules are closed-form, detection is a same-channel
test, and the sensing device's operating mode follows a fixed window-count
state machine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

# Largest detection window any mode-transition rule inspects.
HISTORY_CAPACITY = 4


class SensingMode(IntEnum):
    """Operating mode of the sensing device. Codes match emitted mode traces."""

    SEARCHING = 1
    TRACKING = 2
    LOCK_ON = 3


@dataclass(frozen=True)
class HopSchedule:
    """Linear frequency-hopping schedule over ``num_channels`` channels.

    The channel for timeslot t is ``slope * t + intercept`` wrapped into
    1..num_channels, so the schedule is total over all t >= 1.
    """

    slope: int
    intercept: int
    num_channels: int

    def __post_init__(self):
        if self.num_channels < 2:
            raise ValueError("num_channels must be >= 2")


@dataclass(frozen=True)
class RewardConfig:
    """Per-step reward values for the four jamming outcomes."""

    hit: float = 1.0
    miss: float = 0.0
    escalation: float = -5.0
    deescalation: float = 5.0


@dataclass(frozen=True)
class ModeMachine:
    """Sensing-device mode plus the detection history driving transitions.

    ``history`` holds the most recent detection outcomes (True = target
    detected) since the last mode change, most recent last, capped at
    HISTORY_CAPACITY entries. LOCK_ON is absorbing.
    """

    mode: SensingMode = SensingMode.SEARCHING
    history: tuple = ()

    def __post_init__(self):
        if len(self.history) > HISTORY_CAPACITY:
            raise ValueError("detection history exceeds capacity")


@dataclass(frozen=True)
class SpectrumState:
    """Spectrum utilization observed by the jammer in one timeslot."""

    prev_action: np.ndarray
    sensing_freq: int
    user_freq: int
    sensing_mode: SensingMode

    def encode(self) -> np.ndarray:
        """Flat network input: one-hot blocks for every categorical field.

        Layout: prev action (N), sensing frequency (N), user frequency (N),
        sensing mode (3). All entries lie in [0, 1]. Channel identities are
        nominal, not ordinal — packing a frequency into a single normalized
        scalar forces the networks to carve threshold features out of tanh
        units before they can distinguish channels, which is exactly the
        kind of slow representation learning a small online learner cannot
        afford. One-hot blocks make the relevant maps linear.
        """
        n = self.prev_action.shape[0]
        return np.concatenate(
            [
                self.prev_action.astype(np.float64),
                one_hot(self.sensing_freq, n),
                one_hot(self.user_freq, n),
                one_hot(self.sensing_mode.value, 3),
            ]
        )


@dataclass(frozen=True)
class StepOutcome:
    """Everything produced by executing one jamming action."""

    next_state: SpectrumState
    reward: float
    jam_hit: bool
    conflict: bool
    mode_before: SensingMode
    mode_after: SensingMode
    terminal: bool


def one_hot(channel: int, num_channels: int) -> np.ndarray:
    """One-hot action vector selecting ``channel`` (1-based)."""
    if not 1 <= channel <= num_channels:
        raise ValueError(f"channel {channel} outside 1..{num_channels}")
    a = np.zeros(num_channels, dtype=np.float64)
    a[channel - 1] = 1.0
    return a


def is_one_hot(action: np.ndarray) -> bool:
    return (
        action.ndim == 1
        and np.all((action == 0.0) | (action == 1.0))
        and np.sum(action) == 1.0
    )


def channel_of(action: np.ndarray) -> int:
    """1-based channel selected by a one-hot action."""
    return int(np.argmax(action)) + 1


def hop_frequency(schedule: HopSchedule, t: int) -> int:
    """Channel occupied under ``schedule`` at timeslot t (1-based, t >= 1)."""
    return (schedule.slope * t + schedule.intercept - 1) % schedule.num_channels + 1


def detect(jam_channel: int, sensing_channel: int) -> bool:
    """Whether the sensing device detects the target this slot.

    Same-channel jamming blocks detection; any mismatch lets it succeed.
    """
    return jam_channel != sensing_channel


def mode_transition(
    machine: ModeMachine, detected: bool, reset_on_change: bool = True
) -> ModeMachine:
    """Advance the sensing device's mode machine by one detection.

    Escalations fire on a successful detection once the recent window holds
    enough hits: searching escalates to tracking at 3 hits within the last
    (up to) 4 detections, tracking escalates to lock-on at 2 hits within the
    last (up to) 3. Tracking falls back to searching only after a full
    window of 4 straight misses. Lock-on is absorbing. On a mode change the
    history restarts unless ``reset_on_change`` is False (global-window
    variant).
    """
    if machine.mode is SensingMode.LOCK_ON:
        return machine

    history = (machine.history + (bool(detected),))[-HISTORY_CAPACITY:]
    hits_last4 = sum(history)
    hits_last3 = sum(history[-3:])

    new_mode = machine.mode
    if machine.mode is SensingMode.SEARCHING:
        if detected and hits_last4 >= 3:
            new_mode = SensingMode.TRACKING
    elif machine.mode is SensingMode.TRACKING:
        if detected and hits_last3 >= 2:
            new_mode = SensingMode.LOCK_ON
        elif not detected and len(history) >= 4 and hits_last4 == 0:
            new_mode = SensingMode.SEARCHING

    if new_mode is not machine.mode and reset_on_change:
        return ModeMachine(mode=new_mode, history=())
    return ModeMachine(mode=new_mode, history=history)


def compute_reward(
    jam_hit: bool,
    mode_before: SensingMode,
    mode_after: SensingMode,
    cfg: RewardConfig,
) -> float:
    """Immediate reward for one executed slot.

    Mode transitions outrank hit/miss: an escalation always costs
    ``escalation`` and a fallback always pays ``deescalation``.
    """
    if mode_after.value > mode_before.value:
        return cfg.escalation
    if mode_after.value < mode_before.value:
        return cfg.deescalation
    return cfg.hit if jam_hit else cfg.miss


def step(
    state: SpectrumState,
    action: np.ndarray,
    t: int,
    sensor_schedule: HopSchedule,
    user_schedule: HopSchedule,
    machine: ModeMachine,
    cfg: RewardConfig,
    reset_on_change: bool = True,
) -> tuple[StepOutcome, ModeMachine]:
    """Execute ``action`` (chosen in slot t) in slot t+1.

    Advances both hop schedules, resolves detection against the sensing
    channel, steps the mode machine, scores the reward, and flags a conflict
    when the jamming channel collides with the user's channel in the
    execution slot.
    """
    if not is_one_hot(action):
        raise ValueError("action must be one-hot")

    jam_channel = channel_of(action)
    sensing_next = hop_frequency(sensor_schedule, t + 1)
    user_next = hop_frequency(user_schedule, t + 1)

    jam_hit = jam_channel == sensing_next
    detected = detect(jam_channel, sensing_next)
    conflict = jam_channel == user_next

    next_machine = mode_transition(machine, detected, reset_on_change)
    reward = compute_reward(jam_hit, machine.mode, next_machine.mode, cfg)

    next_state = SpectrumState(
        prev_action=action.copy(),
        sensing_freq=sensing_next,
        user_freq=user_next,
        sensing_mode=next_machine.mode,
    )
    outcome = StepOutcome(
        next_state=next_state,
        reward=reward,
        jam_hit=jam_hit,
        conflict=conflict,
        mode_before=machine.mode,
        mode_after=next_machine.mode,
        terminal=next_machine.mode is SensingMode.LOCK_ON,
    )
    return outcome, next_machine


@dataclass
class SpectrumSim:
    """Stateful wrapper running the confrontation slot by slot.

    One instance is strictly sequential; independent instances do not share
    state and may run concurrently.
    """

    sensor_schedule: HopSchedule
    user_schedule: HopSchedule
    rewards: RewardConfig = field(default_factory=RewardConfig)
    reset_on_change: bool = True
    initial_channel: int = 1

    def __post_init__(self):
        if self.sensor_schedule.num_channels != self.user_schedule.num_channels:
            raise ValueError("schedules must share num_channels")
        self.num_channels = self.sensor_schedule.num_channels
        self.reset()

    def reset(self) -> SpectrumState:
        """Restart the confrontation at timeslot 1 in searching mode."""
        self.t = 1
        self.machine = ModeMachine()
        self.state = SpectrumState(
            prev_action=one_hot(self.initial_channel, self.num_channels),
            sensing_freq=hop_frequency(self.sensor_schedule, 1),
            user_freq=hop_frequency(self.user_schedule, 1),
            sensing_mode=self.machine.mode,
        )
        return self.state

    def step(self, action: np.ndarray) -> StepOutcome:
        outcome, self.machine = step(
            self.state,
            action,
            self.t,
            self.sensor_schedule,
            self.user_schedule,
            self.machine,
            self.rewards,
            self.reset_on_change,
        )
        self.t += 1
        self.state = outcome.next_state
        return outcome
