"""Interaction graphs: static adjacency matrices and radius-based neighbor sets.

Agents are indexed from 0. Neighbor sets are returned as sorted tuples
so that iteration order (and therefore floating point summation order)
is deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import (
    Disconnected,
    IndexOutOfRange,
    NonBinaryEntry,
    NonPositiveRadius,
    NotSymmetric,
    SelfLoop,
    TopologyError,
)

STATIC = "static"
RADIUS = "radius"


@dataclass(frozen=True, eq=False)
class Topology:
    n: int
    adjacency: np.ndarray
    mode: str = STATIC
    rho_com: Optional[float] = None

    def __post_init__(self):
        self.adjacency.setflags(write=False)

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Undirected edge list with i < j, in row-major order."""
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(i), int(j)) for i, j in zip(rows, cols)]

    def degree(self, i: int) -> int:
        return int(self.adjacency[i].sum())

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (
            self.n == other.n
            and self.mode == other.mode
            and self.rho_com == other.rho_com
            and np.array_equal(self.adjacency, other.adjacency)
        )


def complete_adjacency(n: int) -> np.ndarray:
    return np.ones((n, n), dtype=int) - np.eye(n, dtype=int)


def is_connected(adjacency: np.ndarray) -> bool:
    return len(bfs_hops(adjacency, 0)) == adjacency.shape[0]


def bfs_hops(adjacency: np.ndarray, source: int) -> dict[int, int]:
    """Hop distance from ``source`` to every reachable node."""
    hops = {source: 0}
    queue = deque([source])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adjacency[i]):
            j = int(j)
            if j not in hops:
                hops[j] = hops[i] + 1
                queue.append(j)
    return hops


def validate_topology(adjacency, mode: str = STATIC, rho_com: Optional[float] = None) -> Topology:
    """Check an adjacency matrix and wrap it in a :class:`Topology`.

    Raises the subclass of :class:`TopologyError` naming the first
    violated invariant, checked in the order: shape, binary entries,
    self loops, symmetry, connectivity.
    """
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise TopologyError(f"adjacency must be a non-empty square matrix, got shape {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise NonBinaryEntry("adjacency entries must be 0 or 1")
    a = a.astype(int)
    if np.any(np.diag(a) != 0):
        i = int(np.flatnonzero(np.diag(a))[0])
        raise SelfLoop(f"agent {i} is adjacent to itself")
    if not np.array_equal(a, a.T):
        i, j = (int(v) for v in np.argwhere(a != a.T)[0])
        raise NotSymmetric(f"a[{i},{j}] != a[{j},{i}]")
    if not is_connected(a):
        raise Disconnected("interaction graph is not connected")
    if mode not in (STATIC, RADIUS):
        raise TopologyError(f"unknown topology mode {mode!r}")
    if mode == RADIUS:
        if rho_com is None or not rho_com > 0:
            raise NonPositiveRadius(f"rho_com must be positive, got {rho_com}")
        rho_com = float(rho_com)
    else:
        rho_com = None
    return Topology(n=a.shape[0], adjacency=a, mode=mode, rho_com=rho_com)


def _check_index(i: int, n: int):
    if not 0 <= i < n:
        raise IndexOutOfRange(f"agent index {i} outside [0, {n})")


def neighbors(topology: Topology, i: int) -> tuple[int, ...]:
    _check_index(i, topology.n)
    return tuple(int(j) for j in np.flatnonzero(topology.adjacency[i]))


def radius_neighbors(positions: Sequence, i: int, rho_com: float) -> tuple[int, ...]:
    """Agents within ``rho_com`` of agent ``i`` (boundary inclusive)."""
    if not rho_com > 0:
        raise NonPositiveRadius(f"rho_com must be positive, got {rho_com}")
    q = np.asarray(positions, dtype=float)
    _check_index(i, len(q))
    return tuple(int(j) for j in np.flatnonzero(radius_adjacency(q, rho_com)[i]))


def radius_adjacency(positions: Sequence, rho_com: float) -> np.ndarray:
    """Adjacency matrix induced by the communication radius rule."""
    if not rho_com > 0:
        raise NonPositiveRadius(f"rho_com must be positive, got {rho_com}")
    q = np.asarray(positions, dtype=float)
    diff = q[:, None, :] - q[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    a = (dist <= rho_com).astype(int)
    np.fill_diagonal(a, 0)
    return a
