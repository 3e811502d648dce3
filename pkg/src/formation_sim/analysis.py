"""Stability and quality checks on positions and trajectory logs.

Covers the distance-error variables, the quadratic Lyapunov function,
the rigidity matrix, a finite-difference check of the Lyapunov decay
along gradient-controlled runs, and the safety metrics used to judge a
formation run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .exceptions import DegenerateEdge, WrongControlMode

RANK_RTOL = 1e-9


@dataclass
class RigidityReport:
    matrix: np.ndarray
    rank: int
    min_eig_RRt: float
    infinitesimally_rigid: bool


@dataclass
class DecayReport:
    monotone_fraction: float
    max_residual: float
    converged: bool
    residuals: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)


@dataclass
class SafetyMetrics:
    min_inter_agent_distance: float
    min_obstacle_distance: float
    path_lengths: list
    arrival_step: Optional[int]
    terminal_rms_error: float
    terminal_max_relative_error: float


def distance_errors_from(positions, edges: Sequence[tuple[int, int]], desired) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(positions, dtype=float)
    if len(edges) == 0:
        return np.zeros(0), np.zeros(0)
    idx = np.asarray(edges, dtype=int)
    diff = q[idx[:, 0]] - q[idx[:, 1]]
    sq = (diff**2).sum(axis=1)
    desired = np.asarray(desired, dtype=float)
    return sq - desired**2, np.sqrt(sq) - desired


def distance_errors(positions, spec, edges) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge squared-distance error ``delta`` and distance error ``omega``."""
    return distance_errors_from(positions, edges, spec.desired_distances(edges))


def lyapunov_V(delta) -> float:
    delta = np.asarray(delta, dtype=float)
    return 0.25 * float(delta @ delta)


def rigidity_matrix(positions, edges: Sequence[tuple[int, int]]) -> RigidityReport:
    q = np.asarray(positions, dtype=float)
    n = len(q)
    R = np.zeros((len(edges), 2 * n))
    for row, (i, j) in enumerate(edges):
        e = q[i] - q[j]
        if not np.any(e):
            raise DegenerateEdge(f"agents {i} and {j} coincide")
        R[row, 2 * i : 2 * i + 2] = e
        R[row, 2 * j : 2 * j + 2] = -e
    if len(edges) == 0:
        return RigidityReport(R, 0, 0.0, n == 1)
    sv = np.linalg.svd(R, compute_uv=False)
    rank = int((sv > RANK_RTOL * sv[0]).sum()) if sv[0] > 0 else 0
    min_eig = float(np.linalg.eigvalsh(R @ R.T)[0])
    return RigidityReport(R, rank, min_eig, rank == max(2 * n - 3, 0))


def minimally_rigid_edges(positions, base_edges: Sequence[tuple[int, int]] = ()) -> list[tuple[int, int]]:
    """Extend ``base_edges`` greedily to an independent edge set of rank ``2n - 3``.

    Base edges that add no rank are dropped. Candidates are tried in
    lexicographic order, so the result is deterministic.
    """
    q = np.asarray(positions, dtype=float)
    n = len(q)
    chosen: list[tuple[int, int]] = []
    rank = 0
    candidates = [tuple(sorted(e)) for e in base_edges] + list(combinations(range(n), 2))
    for e in candidates:
        if e in chosen:
            continue
        r = rigidity_matrix(q, chosen + [e]).rank
        if r > rank:
            chosen.append(e)
            rank = r
        if rank == 2 * n - 3:
            break
    return chosen


def verify_lyapunov_decay(log, spec, beta: float, dt: Optional[float] = None, tol_final: float = 1e-6) -> DecayReport:
    """Check the Lyapunov decay of a rigidity-gradient run.

    The residual at step ``k`` compares the finite difference
    ``(V[k+1] - V[k]) / dt`` with the continuous-time derivative
    ``-beta * |R^T delta|^2`` and is scaled by ``max(V[k], 1e-12)``.
    """
    if log.control_mode != "rigidity-gradient":
        raise WrongControlMode(f"decay check needs a rigidity-gradient log, got {log.control_mode!r}")
    dt = log.dt if dt is None else dt
    edges = log.edges
    V = np.empty(len(log.positions))
    vdot = np.empty(len(log.positions))
    for k, q in enumerate(log.positions):
        delta, _ = distance_errors(q, spec, edges)
        V[k] = lyapunov_V(delta)
        if V[k] == 0.0:
            vdot[k] = 0.0
            continue
        g = rigidity_matrix(q, edges).matrix.T @ delta
        vdot[k] = -beta * float(g @ g)
    if len(V) < 2:
        return DecayReport(1.0, 0.0, bool(V[0] == 0.0), np.zeros(0), V)
    dV = np.diff(V)
    monotone = float(np.mean(dV <= 0.0))
    residuals = np.abs(dV / dt - vdot[:-1]) / np.maximum(V[:-1], 1e-12)
    converged = bool(V[-1] == 0.0 or V[-1] < tol_final * V[0])
    return DecayReport(monotone, float(residuals.max()), converged, residuals, V)


def lyapunov_diagnostics(log) -> dict:
    """Empirical behaviour of V along any log; informational only."""
    V = log.lyapunov
    dV = np.diff(V)
    return {
        "V_initial": float(V[0]),
        "V_final": float(V[-1]),
        "V_max": float(V.max()),
        "monotone_fraction": float(np.mean(dV <= 0.0)) if len(dV) else 1.0,
    }


def path_lengths(positions) -> np.ndarray:
    steps = np.diff(np.asarray(positions, dtype=float), axis=0)
    return np.sqrt((steps**2).sum(axis=-1)).sum(axis=0)


def safety_metrics(log, tail: int = 50) -> SafetyMetrics:
    """Clearances, path lengths and the terminal formation error of a run.

    The terminal error is taken over the last ``tail`` snapshots.
    """
    window = log.positions[-tail:]
    if len(log.edges):
        omegas = np.array([distance_errors_from(q, log.edges, log.desired_distances)[1] for q in window])
        rms = float(np.sqrt(np.mean(omegas**2)))
        rel = float(np.max(np.abs(omegas) / log.desired_distances))
    else:
        rms = rel = 0.0
    return SafetyMetrics(
        min_inter_agent_distance=float(np.min(log.min_agent_distance)),
        min_obstacle_distance=float(np.min(log.min_obstacle_distance)),
        path_lengths=path_lengths(log.positions).tolist(),
        arrival_step=log.arrival_step,
        terminal_rms_error=rms,
        terminal_max_relative_error=rel,
    )


def relative_formation_error(log) -> np.ndarray:
    """Per-snapshot max over edges of ``|omega| / d``."""
    if not len(log.edges):
        return np.zeros(len(log.positions))
    return np.array(
        [np.max(np.abs(distance_errors_from(q, log.edges, log.desired_distances)[1]) / log.desired_distances) for q in log.positions]
    )


def settling_step(log, tol: float = 0.05) -> Optional[int]:
    """First snapshot from which the relative formation error stays below ``tol``."""
    bad = np.flatnonzero(relative_formation_error(log) >= tol)
    if len(bad) == 0:
        return 0
    k = int(bad[-1]) + 1
    return k if k < len(log.positions) else None


def segment_deviation(path, start, end) -> np.ndarray:
    """Distance of every path point to the segment ``start -> end``."""
    p = np.asarray(path, dtype=float)
    a = np.asarray(start, dtype=float)
    b = np.asarray(end, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    t = np.zeros(len(p)) if denom == 0 else np.clip((p - a) @ ab / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.sqrt(((p - closest) ** 2).sum(axis=1))
