"""Python access to the obstacle-avoidance core library."""

from ._core import (
    Agent,
    ConfigError,
    Environment,
    Predictor,
    collision_risk,
    simulate_trajectory,
)

__all__ = [
    "Agent",
    "ConfigError",
    "Environment",
    "Predictor",
    "collision_risk",
    "simulate_trajectory",
]
