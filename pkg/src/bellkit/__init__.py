"""bellkit: Bell nonlocality toolkit.

Behaviors, the local polytope, quantum correlations, local-variable
simulations, quantum-set tests, self-testing and no-signaling boxes.
"""

from .core_stats import (
    CHSH_SCENARIO,
    Behavior,
    BellInequality,
    CorrelatorVector,
    Scenario,
    behavior_from_table,
    chsh_value,
    correlators,
    no_signaling_residual,
    white_noise,
)
from .errors import BellkitError
from .rng import DEFAULT_SEED

__version__ = "0.1.0"

__all__ = [
    "CHSH_SCENARIO",
    "Behavior",
    "BellInequality",
    "BellkitError",
    "CorrelatorVector",
    "DEFAULT_SEED",
    "Scenario",
    "behavior_from_table",
    "chsh_value",
    "correlators",
    "no_signaling_residual",
    "white_noise",
]
