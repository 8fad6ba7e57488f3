"""Run configuration: defaults, validation, and key=value file parsing."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass
class RunConfig:
    """All knobs for a confrontation run.

    Defaults reproduce the reference scenario: 8 channels, the sensing
    device sweeping up one channel per slot, the user sweeping down.
    """

    # spectrum scenario
    channels: int = 8
    sensor_slope: int = 1
    sensor_intercept: int = 0
    user_slope: int = -1
    user_intercept: int = 8
    reward_hit: float = 1.0
    reward_miss: float = 0.0
    reward_escalation: float = -5.0
    reward_deescalation: float = 5.0
    # when False, detection history carries across mode changes instead of
    # restarting (global sliding-window variant)
    window_reset_on_transition: bool = True

    # learning
    discount: float = 0.9
    # drop the discount from the advantage bootstrap (r + V(s') - V(s))
    undiscounted_advantage: bool = False
    actor_lr: float = 0.02
    critic_lr: float = 0.05
    constraint_lr: float = 0.01
    hidden_size: int = 64
    episode_length: int = 64
    train_episodes: int = 3000
    # keep updating actor/critic on slots where the shield replaced the action
    learn_on_corrected: bool = False
    constraint_train_every: int = 25
    constraint_epochs: int = 200
    constraint_buffer: int = 4096

    # execution
    eval_timeslots: int = 1000
    seed: int = 7
    shield: bool = True
    decision_margin: float = 0.5

    def validate(self) -> "RunConfig":
        def require(ok: bool, key: str, why: str):
            if not ok:
                raise ConfigError(f"{key}: {why} (got {getattr(self, key)!r})")

        require(self.channels >= 2, "channels", "need at least 2 channels")
        require(0.0 < self.discount < 1.0, "discount", "must lie in (0, 1)")
        for key in ("actor_lr", "critic_lr", "constraint_lr"):
            require(getattr(self, key) > 0.0, key, "must be positive")
        require(self.hidden_size >= 1, "hidden_size", "must be positive")
        require(self.episode_length >= 1, "episode_length", "must be positive")
        require(self.train_episodes >= 0, "train_episodes", "must be non-negative")
        require(self.eval_timeslots >= 1, "eval_timeslots", "must be positive")
        require(self.seed >= 0, "seed", "must be non-negative")
        require(self.decision_margin >= 0.0, "decision_margin", "must be non-negative")
        require(
            self.constraint_train_every >= 1, "constraint_train_every", "must be positive"
        )
        require(self.constraint_epochs >= 0, "constraint_epochs", "must be non-negative")
        require(self.constraint_buffer >= 2, "constraint_buffer", "must be at least 2")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        cfg = cls()
        for key, value in data.items():
            _assign(cfg, key, value)
        return cfg.validate()


_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_TRUE_WORDS = {"true", "on", "yes", "1"}
_FALSE_WORDS = {"false", "off", "no", "0"}


def _assign(cfg: RunConfig, key: str, value):
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key: {key}")
    kind = _FIELDS[key]
    try:
        if kind == "bool":
            if isinstance(value, str):
                word = value.strip().lower()
                if word in _TRUE_WORDS:
                    value = True
                elif word in _FALSE_WORDS:
                    value = False
                else:
                    raise ValueError(f"not a boolean: {value!r}")
            value = bool(value)
        elif kind == "int":
            if isinstance(value, bool) or (
                isinstance(value, float) and not value.is_integer()
            ):
                raise ValueError(f"not an integer: {value!r}")
            value = int(str(value).strip(), 10) if isinstance(value, str) else int(value)
        elif kind == "float":
            value = float(value)
        else:  # pragma: no cover - all current fields are covered above
            raise ValueError(f"unsupported field type {kind}")
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    setattr(cfg, key, value)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines. Blank lines and # comments are skipped."""
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        _assign(cfg, key, value)
    return cfg.validate()


def load_config(path: str) -> RunConfig:
    """Read and validate a configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)
