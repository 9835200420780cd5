"""Circular mediated semi-quantum key distribution: simulation and key-rate bounds."""

from .attacks import (
    CollectiveAttack,
    NoiseParameters,
    StochasticChannel,
    UntrustedAttack,
    entangling_probe_attack,
    honest_source,
    identity_attack,
    random_collective_attack,
    random_untrusted_attack,
)
from .keyrate import Scenario, noise_threshold, semi_honest_key_rate, sweep, untrusted_key_rate
from .metrics import communication_cost, comparison_table, qubit_efficiency
from .protocol import ProtocolConfig, SiftedStatistics, run_simulation

__all__ = [
    "CollectiveAttack",
    "NoiseParameters",
    "ProtocolConfig",
    "Scenario",
    "SiftedStatistics",
    "StochasticChannel",
    "UntrustedAttack",
    "communication_cost",
    "comparison_table",
    "entangling_probe_attack",
    "honest_source",
    "identity_attack",
    "noise_threshold",
    "qubit_efficiency",
    "random_collective_attack",
    "random_untrusted_attack",
    "run_simulation",
    "semi_honest_key_rate",
    "sweep",
    "untrusted_key_rate",
]
