"""Action correction layer keeping jamming clear of the friendly user.

The jammer never coordinates with the user, so channel occupancy one slot
ahead has to be predicted. Occupancy is modeled per channel as an affine
function of the action: a state-only baseline plus a learned sensitivity
times the action component. Whenever the proposed action predicts a
violation, a closed-form KKT step relaxes it to the nearest feasible real
vector and the result is projected back onto the one-hot action set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import encoding_length
from .env import SpectrumState, one_hot
from .nets import Adam, DivergenceError, TwoLayerNet

# Sensitivities this close to zero make the multiplier formula useless; the
# channel is handled by the feasibility filter during projection instead.
EPS_SENSITIVITY = 1e-6

# The occupancy constraint itself: predicted occupancy above this is a
# conflict. Decision thresholds add a classification margin on top.
CONSTRAINT_LIMIT = 1.0


class DegenerateSensitivityError(ValueError):
    """Sensitivity too close to zero for the closed-form multiplier."""


def baseline_constraint(state: SpectrumState) -> np.ndarray:
    """Per-channel occupancy with the action zeroed out.

    Counts the jammer's previous transmission and the user's current
    channel, giving values in {0, 1, 2}.
    """
    b = state.prev_action.astype(np.float64).copy()
    b[state.user_freq - 1] += 1.0
    return b


class ConstraintModel:
    """Learned per-channel occupancy sensitivities.

    One shared network maps the encoded state to a sensitivity k_n for every
    channel; predicted occupancy is baseline + k_n * a_n. Only the acted
    channel carries gradient (the others have zero action component); the
    regression target is the occupancy actually observed one slot later.

    The true sensitivity is a linear function of the one-hot state blocks
    (it only shifts where the user's hop lands next), so the network's job
    is mostly to recover a permutation readout.
    """

    def __init__(self, num_channels: int, hidden: int, rng: np.random.Generator):
        self.num_channels = num_channels
        self.net = TwoLayerNet(encoding_length(num_channels), hidden, num_channels, rng)
        # Zero readout: the untrained model predicts exactly the baseline
        # occupancy, so screening starts permissive instead of vetoing (and
        # thereby starving of training data) randomly chosen safe channels.
        self.net.w2[:] = 0.0

    def sensitivities(self, encoded: np.ndarray) -> np.ndarray:
        return self.net.forward(encoded)

    def loss_and_grads(self, encodings, actions, baselines, targets):
        """Mean squared occupancy residual over batch and channels, plus its
        parameter gradients.

        Channels the action left at zero contribute a constant (their
        residual cannot depend on the parameters), so the reducible part
        lives entirely on the acted channels.
        """
        batch, channels = actions.shape
        k, cache = self.net.forward_cached(encodings)
        residual = baselines + k * actions - targets
        loss = float(np.sum(residual * residual) / (batch * channels))
        grad_k = 2.0 * residual * actions / (batch * channels)
        return loss, self.net.grads(cache, grad_k)

    def loss(self, encodings, actions, baselines, targets) -> float:
        value, _ = self.loss_and_grads(encodings, actions, baselines, targets)
        return value

    def action_channel_mse(self, encodings, actions, baselines, targets) -> float:
        """Mean squared residual restricted to the acted channels."""
        k = self.net.forward(encodings)
        residual = (baselines + k * actions - targets) * actions
        return float(np.sum(residual * residual) / encodings.shape[0])

    def fit(
        self,
        encodings,
        actions,
        baselines,
        targets,
        epochs: int,
        lr: float,
        weight_decay: float = 1e-3,
    ):
        """Full-batch Adam on the squared residual; returns per-epoch losses
        (each measured before that epoch's step).

        ``weight_decay`` shrinks the readout layer (decoupled, applied after
        each step). The regression is badly covered off the visited-state
        support, and an unregularized readout happily extrapolates
        sensitivities past the violation threshold there, which turns the
        shield hair-triggered on states it has never watched.
        """
        encodings = np.asarray(encodings, dtype=np.float64)
        actions = np.asarray(actions, dtype=np.float64)
        baselines = np.asarray(baselines, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        optimizer = Adam()
        losses = []
        for _ in range(epochs):
            value, grads = self.loss_and_grads(encodings, actions, baselines, targets)
            if not np.isfinite(value):
                raise DivergenceError("constraint training loss is not finite")
            losses.append(value)
            optimizer.step(self.net, grads, lr, label="constraint")
            shrink = 1.0 - lr * weight_decay
            self.net.w2 *= shrink
            self.net.b2 *= shrink
        return losses


def predict_constraint(
    model: ConstraintModel, state: SpectrumState, action: np.ndarray
) -> tuple[np.ndarray, bool]:
    """Predicted per-channel occupancy for an action, plus a violation flag.

    The flag uses the raw constraint limit; decision layers that want slack
    against learned noise should compare against their own threshold.
    """
    values = baseline_constraint(state) + model.sensitivities(state.encode()) * action
    return values, bool(np.any(values > CONSTRAINT_LIMIT))


def train_constraint_model(model: ConstraintModel, transitions, epochs: int, lr: float):
    """Fit the model on (state, action, next_state) transitions.

    The regression target for each sample is the baseline occupancy observed
    in the next state. Returns per-epoch losses.
    """
    encodings = np.stack([s.encode() for s, _, _ in transitions])
    actions = np.stack([a for _, a, _ in transitions])
    baselines = np.stack([baseline_constraint(s) for s, _, _ in transitions])
    targets = np.stack([baseline_constraint(ns) for _, _, ns in transitions])
    return model.fit(encodings, actions, baselines, targets, epochs, lr)


def lagrange_multiplier(sensitivity: float, action_value: float, baseline: float) -> float:
    """Optimal multiplier for one channel's occupancy constraint.

    Solves the single-constraint projection in closed form:
    max(0, (k * a + b - 1) / k^2). Raises DegenerateSensitivityError when
    |k| <= EPS_SENSITIVITY, where the formula would explode.
    """
    if abs(sensitivity) <= EPS_SENSITIVITY:
        raise DegenerateSensitivityError(
            f"sensitivity {sensitivity!r} too small for closed-form multiplier"
        )
    slack = sensitivity * action_value + baseline - CONSTRAINT_LIMIT
    return max(0.0, slack / (sensitivity * sensitivity))


def project_to_onehot(
    relaxed: np.ndarray,
    predicted_if_acted: np.ndarray,
    limit: float = CONSTRAINT_LIMIT,
) -> np.ndarray:
    """Snap a relaxed action onto the one-hot set, preferring feasibility.

    Picks the largest relaxed component among channels whose predicted
    occupancy (were they transmitted on) stays within ``limit``; ties go to
    the channel with the smallest predicted occupancy, then the lowest
    index. A corrected proposal leaves every alternative tied near zero, so
    the tie-break decides where corrections land — steering them toward the
    emptiest-looking channel keeps a slightly miscalibrated prediction from
    parking the correction right next to the limit. If no channel
    qualifies, falls back to the channel with the smallest predicted
    occupancy.
    """
    feasible = predicted_if_acted <= limit
    if np.any(feasible):
        masked = np.where(feasible, relaxed, -np.inf)
        best = masked == np.max(masked)
        occupancy = np.where(best, predicted_if_acted, np.inf)
        idx = int(np.argmin(occupancy))
    else:
        idx = int(np.argmin(predicted_if_acted))
    return one_hot(idx + 1, relaxed.shape[0])


@dataclass(frozen=True)
class CorrectionResult:
    """Outcome of one KKT correction pass."""

    relaxed: np.ndarray
    multipliers: np.ndarray
    corrected: np.ndarray
    was_corrected: bool
    degenerate_channels: tuple


def correct_action(
    action: np.ndarray,
    baselines: np.ndarray,
    sensitivities: np.ndarray,
    limit: float = CONSTRAINT_LIMIT,
) -> CorrectionResult:
    """Relax an action to satisfy the occupancy constraints, then re-project.

    Channel constraints are independent, so each gets its own closed-form
    multiplier and the relaxed action is a_n - lambda_n * k_n. Channels with
    degenerate sensitivity keep a zero multiplier and are left to the
    projection's feasibility filter. ``limit`` only widens that filter; the
    multipliers always target the raw constraint limit.
    """
    n = action.shape[0]
    multipliers = np.zeros(n)
    degenerate = []
    for i in range(n):
        try:
            multipliers[i] = lagrange_multiplier(
                float(sensitivities[i]), float(action[i]), float(baselines[i])
            )
        except DegenerateSensitivityError:
            degenerate.append(i)
    relaxed = action - multipliers * sensitivities
    corrected = project_to_onehot(
        np.clip(relaxed, 0.0, 1.0), baselines + sensitivities, limit
    )
    return CorrectionResult(
        relaxed=relaxed,
        multipliers=multipliers,
        corrected=corrected,
        was_corrected=not np.array_equal(corrected, action),
        degenerate_channels=tuple(degenerate),
    )


@dataclass(frozen=True)
class ShieldDecision:
    """What the shield did with one proposed action."""

    executed: np.ndarray
    corrected: bool
    predicted: np.ndarray
    result: CorrectionResult | None


class Shield:
    """Screens proposed actions through the constraint model.

    ``margin`` widens the violation threshold to 1 + margin: trained
    occupancy predictions cluster near the integers, so the midpoint margin
    of 0.5 separates "about 1" from "about 2" without hair-trigger
    corrections on channels sitting exactly at the limit.
    """

    def __init__(self, model: ConstraintModel, margin: float = 0.5):
        self.model = model
        self.margin = margin

    @property
    def threshold(self) -> float:
        return CONSTRAINT_LIMIT + self.margin

    def screen(self, state: SpectrumState, action: np.ndarray) -> ShieldDecision:
        baselines = baseline_constraint(state)
        sensitivities = self.model.sensitivities(state.encode())
        predicted = baselines + sensitivities * action
        if np.any(predicted > self.threshold):
            result = correct_action(action, baselines, sensitivities, self.threshold)
            return ShieldDecision(
                executed=result.corrected,
                corrected=result.was_corrected,
                predicted=predicted,
                result=result,
            )
        return ShieldDecision(
            executed=action, corrected=False, predicted=predicted, result=None
        )

    def screen_channel(self, state: SpectrumState, channel: int) -> ShieldDecision:
        return self.screen(state, one_hot(channel, self.model.num_channels))
