"""User-safe reinforcement-learning jammer.

An actor-critic agent picks jamming channels against a frequency-hopping
multifunction sensing device while a correction layer (learned occupancy
constraints plus a closed-form KKT projection) keeps every executed action
clear of a non-cooperative friendly user.
"""

from .config import RunConfig, load_config
from .env import (
    HopSchedule,
    ModeMachine,
    RewardConfig,
    SensingMode,
    SpectrumSim,
    SpectrumState,
    StepOutcome,
)
from .harness import (
    ConfrontationLedger,
    RunTrace,
    is_critical_instant,
    run_inference,
    run_training,
    success_rate,
)
from .shield import ConstraintModel, Shield, correct_action, project_to_onehot

__version__ = "0.1.0"
