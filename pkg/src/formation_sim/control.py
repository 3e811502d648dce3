"""Control laws: consensus, leader-follower formation keeping, and the
distance-based rigidity gradient controller.

All laws read one immutable snapshot of positions, an ``(n, 2)`` array,
so that inputs for a step can be evaluated in any agent order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .exceptions import DegenerateEdge, IndexOutOfRange, LeaderPassedToFollowerLaw, ValidationError
from .topology import Topology

LILF = "lilf"
CONSENSUS = "consensus"
RIGIDITY_GRADIENT = "rigidity-gradient"
CONTROL_MODES = (LILF, CONSENSUS, RIGIDITY_GRADIENT)

# how the leader's neighbour term is read
BIAS_ERROR = "error"
BIAS_LITERAL = "literal"


@dataclass(frozen=True, eq=False)
class FormationSpec:
    """Desired offset of every agent from the leader.

    ``desired_relative(i, j)`` is ``offsets[i] - offsets[j]``, i.e. where
    agent ``i`` should sit as seen from agent ``j``.
    """

    offsets: np.ndarray
    leader_index: int = -1

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1, 2)
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        leader = self.leader_index if self.leader_index >= 0 else len(offsets) + self.leader_index
        if not 0 <= leader < len(offsets):
            raise ValidationError(f"leader_index {self.leader_index} outside [0, {len(offsets)})")
        object.__setattr__(self, "leader_index", leader)
        if np.any(offsets[leader] != 0.0):
            raise ValidationError("the leader's own offset must be (0, 0)")

    @property
    def n(self) -> int:
        return len(self.offsets)

    def desired_relative(self, i: int, j: int) -> np.ndarray:
        return self.offsets[i] - self.offsets[j]

    def desired_distance(self, i: int, j: int) -> float:
        r = self.desired_relative(i, j)
        return float(np.hypot(r[0], r[1]))

    def desired_distances(self, edges: Sequence[tuple[int, int]]) -> np.ndarray:
        return np.array([self.desired_distance(i, j) for i, j in edges], dtype=float)

    def min_pairwise_distance(self) -> float:
        if self.n < 2:
            return np.inf
        return min(self.desired_distance(i, j) for i, j in combinations(range(self.n), 2))

    def check_edges(self, edges: Sequence[tuple[int, int]]):
        for i, j in edges:
            if self.desired_distance(i, j) <= 0:
                raise ValidationError(f"edge ({i}, {j}) has zero desired length")

    def __eq__(self, other):
        if not isinstance(other, FormationSpec):
            return NotImplemented
        return self.leader_index == other.leader_index and np.array_equal(self.offsets, other.offsets)


@dataclass(frozen=True)
class ControlGains:
    epsilon: float = 1.0
    gamma: float = 0.3
    mu: float = 1.0
    beta: float = 0.1

    def __post_init__(self):
        for name in ("epsilon", "gamma", "mu", "beta"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")


def _row(topology: Topology, i: int, adjacency: Optional[np.ndarray]) -> np.ndarray:
    if not 0 <= i < topology.n:
        raise IndexOutOfRange(f"agent index {i} outside [0, {topology.n})")
    a = topology.adjacency if adjacency is None else adjacency
    return np.asarray(a[i], dtype=float)


def consensus_input(positions, topology: Topology, i: int, adjacency=None) -> np.ndarray:
    """Sum of ``a_ij * (q_j - q_i)`` over the neighbours of ``i``."""
    q = np.asarray(positions, dtype=float)
    a = _row(topology, i, adjacency)
    return a @ (q - q[i])


def formation_feedback(positions, topology: Topology, spec: FormationSpec, i: int, adjacency=None) -> np.ndarray:
    """Sum of ``a_ij * (q_j - q_i - (o_j - o_i))``; zero at the desired shape."""
    q = np.asarray(positions, dtype=float)
    a = _row(topology, i, adjacency)
    return a @ ((q - q[i]) - (spec.offsets - spec.offsets[i]))


def follower_input(positions, topology: Topology, spec: FormationSpec, i: int, gains: ControlGains, f_i, adjacency=None) -> np.ndarray:
    if i == spec.leader_index:
        raise LeaderPassedToFollowerLaw(f"agent {i} is the leader")
    return gains.epsilon * formation_feedback(positions, topology, spec, i, adjacency) + gains.mu * np.asarray(f_i, dtype=float)


def leader_input(
    positions,
    topology: Topology,
    spec: FormationSpec,
    target,
    gains: ControlGains,
    f_n,
    srm_term,
    adjacency=None,
    leader_bias: str = BIAS_ERROR,
) -> np.ndarray:
    """Target seeking plus neighbour coupling plus repulsion for the leader.

    With ``leader_bias="literal"`` the neighbour term is the constant
    ``sum a_Nj (o_N - o_j)`` instead of an error feedback.
    """
    q = np.asarray(positions, dtype=float)
    n = spec.leader_index
    if leader_bias == BIAS_LITERAL:
        a = _row(topology, n, adjacency)
        coupling = a @ (spec.offsets[n] - spec.offsets)
    else:
        coupling = formation_feedback(q, topology, spec, n, adjacency)
    return (
        np.asarray(srm_term, dtype=float)
        + gains.gamma * (np.asarray(target, dtype=float) - q[n])
        + coupling
        + gains.mu * np.asarray(f_n, dtype=float)
    )


def _edge_vectors(q: np.ndarray, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    idx = np.asarray(edges, dtype=int).reshape(-1, 2)
    diff = q[idx[:, 0]] - q[idx[:, 1]]
    zero = np.flatnonzero(np.all(diff == 0.0, axis=1))
    if len(zero):
        i, j = idx[zero[0]]
        raise DegenerateEdge(f"agents {i} and {j} coincide")
    return diff


def gradient_rigidity_input(positions, spec: FormationSpec, edges, beta: float) -> np.ndarray:
    """All inputs of ``u = -beta * R(q)^T delta``.

    ``delta`` holds the squared-distance errors ``|q_i - q_j|^2 - d_ij^2``.
    Assembled edge by edge rather than through the rigidity matrix so it
    stays independent of :func:`formation_sim.analysis.rigidity_matrix`.
    """
    q = np.asarray(positions, dtype=float)
    diff = _edge_vectors(q, edges)
    delta = (diff**2).sum(axis=1) - spec.desired_distances(edges) ** 2
    u = np.zeros_like(q)
    for (i, j), e, d in zip(edges, diff, delta):
        u[i] -= beta * d * e
        u[j] += beta * d * e
    return u
