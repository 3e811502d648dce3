"""Discrete-time formation simulation.

Each step evaluates every agent's forces and input from one snapshot,
then moves all agents at once: ``q[k+1] = q[k] + dt * u[k]``. The run
stops when the leader is within ``eps_goal`` of the target or after
``k_max`` steps.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import analysis
from .control import (
    BIAS_ERROR,
    BIAS_LITERAL,
    CONSENSUS,
    CONTROL_MODES,
    LILF,
    RIGIDITY_GRADIENT,
    ControlGains,
    FormationSpec,
    consensus_input,
    formation_feedback,
    gradient_rigidity_input,
    leader_input,
)
from .exceptions import CoincidentWithObstacle, NonFiniteState, ValidationError
from .potential import (
    ApfGains,
    Environment,
    attractive_force,
    detect_lmp,
    srm_perturbation,
    total_repulsion,
)
from .topology import RADIUS, Topology, is_connected, radius_adjacency

log = logging.getLogger(__name__)

ARRIVED = "arrived"
NOT_ARRIVED = "not_arrived"
COLLISION = "collision"
# modes without target tracking finish at k_max
COMPLETED = "completed"

SRM_ADD = "add"
SRM_REPLACE = "replace"


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    theta = math.remainder(theta, 2 * math.pi)
    return math.pi if theta == -math.pi else theta


@dataclass
class AgentState:
    position: np.ndarray
    heading: float = 0.0
    last_input: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        self.last_input = np.asarray(self.last_input, dtype=float).reshape(2)
        if not np.all(np.isfinite(self.position)):
            raise NonFiniteState(f"non-finite position {self.position}")
        self.heading = wrap_angle(float(self.heading))


@dataclass(eq=False)
class SimConfig:
    topology: Topology
    formation: FormationSpec
    environment: Environment
    initial_states: list
    apf: ApfGains = field(default_factory=ApfGains)
    control: ControlGains = field(default_factory=ControlGains)
    control_mode: str = LILF
    k_max: int = 800
    dt: float = 1.0
    seed: int = 0
    rho_a: Optional[float] = None
    srm_enabled: bool = True
    srm_mode: str = SRM_ADD
    leader_bias: str = BIAS_ERROR

    def __post_init__(self):
        n = self.topology.n
        if len(self.initial_states) != n:
            raise ValidationError(f"{len(self.initial_states)} initial states for {n} agents")
        if self.formation.n != n:
            raise ValidationError(f"formation has {self.formation.n} offsets for {n} agents")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValidationError(f"k_max must be an integer >= 1, got {self.k_max}")
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.control_mode not in CONTROL_MODES:
            raise ValidationError(f"unknown control mode {self.control_mode!r}")
        if self.srm_mode not in (SRM_ADD, SRM_REPLACE):
            raise ValidationError(f"unknown srm mode {self.srm_mode!r}")
        if self.leader_bias not in (BIAS_ERROR, BIAS_LITERAL):
            raise ValidationError(f"unknown leader bias {self.leader_bias!r}")
        self.formation.check_edges(self.topology.edges)
        d_min = self.formation.min_pairwise_distance()
        if self.rho_a is None:
            self.rho_a = min(self.environment.rho_m, 0.5 * d_min)
        elif not 0 < self.rho_a <= d_min:
            raise ValidationError(
                f"rho_a={self.rho_a} must lie in (0, {d_min}] so the desired formation "
                "is outside the agent repulsion zone"
            )

    @property
    def eps_goal(self) -> float:
        return self.apf.eps_goal

    @property
    def initial_positions(self) -> np.ndarray:
        return np.array([s.position for s in self.initial_states], dtype=float)

    @property
    def initial_headings(self) -> np.ndarray:
        return np.array([s.heading for s in self.initial_states], dtype=float)


@dataclass
class StepRecord:
    inputs: np.ndarray
    f_att: np.ndarray
    f_rep: np.ndarray
    srm: np.ndarray
    lmp: np.ndarray
    events: list = field(default_factory=list)


@dataclass(eq=False)
class TrajectoryLog:
    """Full history of one run.

    Snapshot ``k`` holds positions and headings at step ``k``; the force,
    input and flag arrays at row ``k`` are what was evaluated on that
    snapshot to produce ``k + 1``. The final row carries zeros since no
    step is taken from it.
    """

    positions: np.ndarray
    headings: np.ndarray
    inputs: np.ndarray
    f_att: np.ndarray
    f_rep: np.ndarray
    srm: np.ndarray
    lmp: np.ndarray
    lyapunov: np.ndarray
    min_agent_distance: np.ndarray
    min_obstacle_distance: np.ndarray
    leader_target_distance: np.ndarray
    outcome: str
    arrival_step: Optional[int]
    dt: float
    control_mode: str
    leader_index: int
    edges: list
    desired_distances: np.ndarray
    obstacles: np.ndarray
    target: np.ndarray
    events: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def final_k(self) -> int:
        return len(self.positions) - 1

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    @property
    def leader_path(self) -> np.ndarray:
        return self.positions[:, self.leader_index]


def check_arrived(q_leader, q_target, eps_goal: float) -> bool:
    d = np.asarray(q_leader, dtype=float) - np.asarray(q_target, dtype=float)
    return bool(np.hypot(d[0], d[1]) <= eps_goal)


def _active_adjacency(config: SimConfig, q: np.ndarray) -> np.ndarray:
    if config.topology.mode == RADIUS:
        return radius_adjacency(q, config.topology.rho_com)
    return config.topology.adjacency


def step(positions, headings, config: SimConfig, rng: np.random.Generator, k: int, recent=None):
    """Advance one synchronous step.

    ``recent`` is an optional sequence of earlier position snapshots
    (oldest first, current one last) used by the stall test of the
    local-minimum detector. Returns ``(next_positions, next_headings,
    record)``.
    """
    q = np.array(positions, dtype=float)
    n = len(q)
    zeros = np.zeros((n, 2))
    f_att = zeros.copy()
    f_rep = zeros.copy()
    srm = np.zeros(n, dtype=bool)
    lmp = np.zeros(n, dtype=bool)
    events = []

    if config.control_mode == CONSENSUS:
        adjacency = _active_adjacency(config, q)
        u = np.array([consensus_input(q, config.topology, i, adjacency) for i in range(n)]).reshape(n, 2)
    elif config.control_mode == RIGIDITY_GRADIENT:
        u = gradient_rigidity_input(q, config.formation, config.topology.edges, config.control.beta)
    else:
        u, adjacency = _lilf_inputs(q, config, rng, recent, f_att, f_rep, srm, lmp)
        if config.topology.mode == RADIUS and not is_connected(adjacency):
            events.append({"k": k, "kind": "disconnected"})
            log.warning("communication graph disconnected at step %d", k)
    for i in np.flatnonzero(lmp):
        events.append({"k": k, "kind": "lmp", "agent": int(i), "srm": bool(srm[i])})

    nxt = q + config.dt * u
    if not np.all(np.isfinite(nxt)):
        raise NonFiniteState(f"non-finite state at step {k + 1}")
    heads = np.array(headings, dtype=float)
    for i in range(n):
        if u[i, 0] != 0.0 or u[i, 1] != 0.0:
            heads[i] = wrap_angle(math.atan2(u[i, 1], u[i, 0]))
    return nxt, heads, StepRecord(u, f_att, f_rep, srm, lmp, events)


def _lilf_inputs(q, config: SimConfig, rng, recent, f_att, f_rep, srm, lmp):
    topo, spec, env = config.topology, config.formation, config.environment
    apf, gains = config.apf, config.control
    leader = spec.leader_index
    adjacency = _active_adjacency(config, q)
    n = len(q)
    feedback = np.zeros((n, 2))
    for i in range(n):
        f_rep[i] = total_repulsion(i, q, env, apf, config.rho_a)
        feedback[i] = formation_feedback(q, topo, spec, i, adjacency)
        if i == leader:
            f_att[i] = attractive_force(q[i], env.target, apf.eta)
            rho_t = float(np.hypot(*(env.target - q[i])))
        else:
            f_att[i] = gains.epsilon * feedback[i]
            deg = adjacency[i].sum()
            rho_t = float(np.hypot(*feedback[i])) / deg if deg else 0.0
        window = None if recent is None else [snap[i] for snap in recent]
        lmp[i] = detect_lmp(f_att[i] + f_rep[i], rho_t, window, apf)

    u = np.zeros((n, 2))
    for i in range(n):
        kick = np.zeros(2)
        if lmp[i] and config.srm_enabled:
            srm[i] = True
            kick = srm_perturbation(apf, rng)
        replace = srm[i] and config.srm_mode == SRM_REPLACE
        if i == leader:
            if replace:
                u[i] = kick + leader_input(q, topo, spec, q[i], gains, np.zeros(2), np.zeros(2), adjacency, config.leader_bias)
            else:
                u[i] = leader_input(q, topo, spec, env.target, gains, f_rep[i], kick, adjacency, config.leader_bias)
        elif replace:
            u[i] = kick + gains.epsilon * feedback[i]
        else:
            u[i] = kick + gains.epsilon * feedback[i] + gains.mu * f_rep[i]
    return u, adjacency


def _snapshot_metrics(q: np.ndarray, config: SimConfig, edges, desired):
    diff = q[:, None, :] - q[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    n = len(q)
    min_agent = float(dist[np.triu_indices(n, 1)].min()) if n > 1 else np.inf
    obs = config.environment.obstacles
    if len(obs):
        d = q[:, None, :] - obs[None, :, :]
        min_obs = float(np.sqrt((d**2).sum(axis=-1)).min())
    else:
        min_obs = np.inf
    delta, _ = analysis.distance_errors_from(q, edges, desired)
    lead = config.environment.target - q[config.formation.leader_index]
    return analysis.lyapunov_V(delta), min_agent, min_obs, float(np.hypot(lead[0], lead[1]))


def run(config: SimConfig, initial_positions=None) -> TrajectoryLog:
    """Run the simulation to arrival, collision or ``k_max``.

    ``initial_positions`` overrides the configured starting positions
    (headings are kept).
    """
    rng = np.random.default_rng(config.seed)
    q = config.initial_positions if initial_positions is None else np.array(initial_positions, dtype=float)
    heads = config.initial_headings
    n = len(q)
    edges = config.topology.edges
    desired = config.formation.desired_distances(edges)
    tracking = config.control_mode == LILF

    positions, headings = [q], [heads]
    inputs, f_att, f_rep, srm, lmp = [], [], [], [], []
    metrics = [_snapshot_metrics(q, config, edges, desired)]
    events = []
    recent = deque([q], maxlen=config.apf.stall_window)
    outcome, arrival, error = (NOT_ARRIVED if tracking else COMPLETED), None, None

    if tracking and check_arrived(q[config.formation.leader_index], config.environment.target, config.eps_goal):
        outcome, arrival = ARRIVED, 0
    else:
        for k in range(config.k_max):
            try:
                q, heads, rec = step(q, heads, config, rng, k, recent)
            except CoincidentWithObstacle as exc:
                outcome, error = COLLISION, str(exc)
                events.append({"k": k, "kind": "collision", "detail": error})
                log.warning("run aborted at step %d: %s", k, exc)
                break
            inputs.append(rec.inputs)
            f_att.append(rec.f_att)
            f_rep.append(rec.f_rep)
            srm.append(rec.srm)
            lmp.append(rec.lmp)
            events.extend(rec.events)
            positions.append(q)
            headings.append(heads)
            recent.append(q)
            metrics.append(_snapshot_metrics(q, config, edges, desired))
            if tracking and check_arrived(q[config.formation.leader_index], config.environment.target, config.eps_goal):
                outcome, arrival = ARRIVED, k + 1
                break

    zeros = np.zeros((n, 2))
    inputs.append(zeros)
    f_att.append(zeros)
    f_rep.append(zeros)
    srm.append(np.zeros(n, dtype=bool))
    lmp.append(np.zeros(n, dtype=bool))
    m = np.array(metrics, dtype=float).reshape(-1, 4)
    return TrajectoryLog(
        positions=np.array(positions),
        headings=np.array(headings),
        inputs=np.array(inputs),
        f_att=np.array(f_att),
        f_rep=np.array(f_rep),
        srm=np.array(srm),
        lmp=np.array(lmp),
        lyapunov=m[:, 0],
        min_agent_distance=m[:, 1],
        min_obstacle_distance=m[:, 2],
        leader_target_distance=m[:, 3],
        outcome=outcome,
        arrival_step=arrival,
        dt=config.dt,
        control_mode=config.control_mode,
        leader_index=config.formation.leader_index,
        edges=edges,
        desired_distances=desired,
        obstacles=config.environment.obstacles.copy(),
        target=config.environment.target.copy(),
        events=events,
        error=error,
    )
