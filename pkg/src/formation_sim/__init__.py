"""Leader-follower formation control with potential-field obstacle avoidance."""

from .analysis import distance_errors, lyapunov_V, rigidity_matrix, safety_metrics, verify_lyapunov_decay
from .control import ControlGains, FormationSpec
from .potential import ApfGains, Environment
from .scenarios import Scenario, builtin_scenario, export_trajectory, load_scenario, summarize
from .simulation import AgentState, SimConfig, TrajectoryLog, run, step
from .topology import Topology, validate_topology

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "ApfGains",
    "ControlGains",
    "Environment",
    "FormationSpec",
    "Scenario",
    "SimConfig",
    "Topology",
    "TrajectoryLog",
    "builtin_scenario",
    "distance_errors",
    "export_trajectory",
    "load_scenario",
    "lyapunov_V",
    "rigidity_matrix",
    "run",
    "safety_metrics",
    "step",
    "summarize",
    "validate_topology",
    "verify_lyapunov_decay",
]
