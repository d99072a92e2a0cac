from .base import ModelAccessError, Observation
from .power_control import (
    PowerControlConfig,
    PowerControlEnv,
    instant_rate,
    waterfilling_oracle,
)
from .user_assoc import (
    UserAssocConfig,
    UserAssocEnv,
    capacity_violation,
    path_loss_db,
    sum_rate,
)

__all__ = [
    "ModelAccessError",
    "Observation",
    "PowerControlConfig",
    "PowerControlEnv",
    "UserAssocConfig",
    "UserAssocEnv",
    "capacity_violation",
    "instant_rate",
    "path_loss_db",
    "sum_rate",
    "waterfilling_oracle",
]
