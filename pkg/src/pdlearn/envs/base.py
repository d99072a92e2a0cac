"""Shared environment surface: observations and the model-free boundary."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ModelAccessError(TypeError):
    """Raised when code holding a model-free handle asks for the analytic model."""


@dataclass(frozen=True)
class Observation:
    """What the environment reveals after executing an action at a status.

    ``objective_value`` is in the environment's natural units (bit/s for user
    association, bit/s/Hz for power control). ``instant_constraints`` holds
    the per-status g_i values (<= 0 means satisfied); ``avg_constraint_terms``
    holds the per-sample c_j terms whose expectation is constrained to <= 0.
    """

    objective_value: float
    instant_constraints: np.ndarray = field(default_factory=lambda: np.zeros(0))
    avg_constraint_terms: np.ndarray = field(default_factory=lambda: np.zeros(0))
