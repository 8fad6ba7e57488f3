"""Checkpoint save/load for trained runs.

One JSON document holds the configuration, all three networks, the RNG
state, and the episode counter, so a run can be reproduced or resumed
bit-for-bit (JSON keeps full float precision).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .agent import PolicyNetwork, ValueNetwork
from .config import RunConfig
from .shield import ConstraintModel

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable, mismatched, or malformed checkpoint."""


@dataclass
class Checkpoint:
    config: RunConfig
    policy: PolicyNetwork
    critic: ValueNetwork
    constraint: ConstraintModel
    rng: np.random.Generator
    episodes_trained: int


def _params_to_lists(net) -> dict:
    return {key: value.tolist() for key, value in net.get_params().items()}


def save_checkpoint(
    path: str,
    config: RunConfig,
    policy: PolicyNetwork,
    critic: ValueNetwork,
    constraint: ConstraintModel,
    rng: np.random.Generator,
    episodes_trained: int,
):
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "policy": _params_to_lists(policy.net),
        "critic": _params_to_lists(critic.net),
        "constraint": _params_to_lists(constraint.net),
        "rng_state": rng.bit_generator.state,
        "episodes_trained": episodes_trained,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from None

    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version!r} "
            f"(expected {CHECKPOINT_VERSION})"
        )

    try:
        config = RunConfig.from_dict(payload["config"])
        seeder = np.random.default_rng(0)  # placeholder; state overwritten below
        policy = PolicyNetwork(config.channels, config.hidden_size, seeder)
        critic = ValueNetwork(config.channels, config.hidden_size, seeder)
        constraint = ConstraintModel(config.channels, config.hidden_size, seeder)
        policy.net.set_params(payload["policy"])
        critic.net.set_params(payload["critic"])
        constraint.net.set_params(payload["constraint"])
        rng = np.random.default_rng()
        rng.bit_generator.state = payload["rng_state"]
        episodes = int(payload["episodes_trained"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from None

    return Checkpoint(
        config=config,
        policy=policy,
        critic=critic,
        constraint=constraint,
        rng=rng,
        episodes_trained=episodes,
    )
