"""Artificial potential field with a stress-response escape term.

Forces are plain 2-vectors (numpy arrays of shape (2,)). The field is
made of a linear attraction toward the target and an inverse-distance
repulsion that is active only inside an obstacle's action radius. When
attraction and repulsion cancel away from the target the agent is in a
local minimum; :func:`srm_perturbation` supplies the bounded random push
used to leave it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import CoincidentWithObstacle, ValidationError

# rho_o below SINGULAR_FRACTION * rho is treated as a collision
SINGULAR_FRACTION = 1e-6


@dataclass(frozen=True, eq=False)
class Environment:
    obstacles: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    rho_m: float = 1.0
    target: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        obstacles = np.asarray(self.obstacles, dtype=float).reshape(-1, 2)
        target = np.asarray(self.target, dtype=float).reshape(2)
        object.__setattr__(self, "obstacles", obstacles)
        object.__setattr__(self, "target", target)
        if not self.rho_m > 0:
            raise ValidationError(f"rho_m must be positive, got {self.rho_m}")
        if len(obstacles):
            inside = np.linalg.norm(obstacles - target, axis=1) < self.rho_m
            if inside.any():
                warnings.warn(
                    f"target {tuple(target)} lies inside the action radius of "
                    f"obstacle(s) {np.flatnonzero(inside).tolist()}",
                    stacklevel=2,
                )

    @property
    def m(self) -> int:
        return len(self.obstacles)


@dataclass(frozen=True)
class ApfGains:
    eta: float = 0.3
    k_r: float = 1.0
    gamma_srm: float = 0.5
    eps_lmp: float = 1e-3
    eps_goal: float = 0.5
    stall_window: int = 50
    stall_tol: float = 1e-4

    def __post_init__(self):
        for name in ("eta", "k_r", "eps_lmp", "eps_goal", "stall_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.gamma_srm < 1:
            raise ValidationError(f"gamma_srm must lie in (0, 1), got {self.gamma_srm}")
        if int(self.stall_window) != self.stall_window or self.stall_window < 1:
            raise ValidationError(f"stall_window must be an integer >= 1, got {self.stall_window}")


def attractive_force(q_i, q_t, eta: float) -> np.ndarray:
    """Pull of magnitude ``eta * |q_t - q_i|`` pointing at the target."""
    return eta * (np.asarray(q_t, dtype=float) - np.asarray(q_i, dtype=float))


def repulsive_force(q_i, q_o, rho_m: float, k_r: float) -> np.ndarray:
    """Push away from a single point obstacle.

    Zero outside ``rho_m``; inside it the magnitude is
    ``k_r * (1/rho - 1/rho_m) / rho**2``, which vanishes continuously at
    the boundary and grows without bound as ``rho -> 0``.
    """
    diff = np.asarray(q_i, dtype=float) - np.asarray(q_o, dtype=float)
    rho = float(np.hypot(diff[0], diff[1]))
    if rho < SINGULAR_FRACTION * rho_m:
        raise CoincidentWithObstacle(f"agent at distance {rho:.3g} from obstacle at {tuple(q_o)}")
    if rho > rho_m:
        return np.zeros(2)
    return k_r * (1.0 / rho - 1.0 / rho_m) / rho**2 * (diff / rho)


def _repulsion_sum(q_i: np.ndarray, sources: np.ndarray, rho: float, k_r: float) -> np.ndarray:
    # vectorised sum of repulsive_force over sources sharing one radius
    if len(sources) == 0:
        return np.zeros(2)
    diff = q_i - sources
    dist = np.hypot(diff[:, 0], diff[:, 1])
    if np.any(dist < SINGULAR_FRACTION * rho):
        j = int(np.argmin(dist))
        raise CoincidentWithObstacle(
            f"agent at distance {dist[j]:.3g} from repulsive source at {tuple(sources[j])}"
        )
    active = dist <= rho
    if not active.any():
        return np.zeros(2)
    d = dist[active]
    mag = k_r * (1.0 / d - 1.0 / rho) / d**2
    return ((mag / d)[:, None] * diff[active]).sum(axis=0)


def total_repulsion(i: int, positions, env: Environment, gains: ApfGains, rho_a: float) -> np.ndarray:
    """Repulsion on agent ``i`` from every obstacle and every other agent.

    Obstacles act within ``env.rho_m``, other agents within ``rho_a``.
    """
    q = np.asarray(positions, dtype=float)
    others = np.delete(q, i, axis=0)
    return _repulsion_sum(q[i], env.obstacles, env.rho_m, gains.k_r) + _repulsion_sum(
        q[i], others, rho_a, gains.k_r
    )


def resultant_force(f_att, f_rep) -> np.ndarray:
    return np.asarray(f_att, dtype=float) + np.asarray(f_rep, dtype=float)


def window_displacement(recent_positions: Sequence) -> float:
    """Largest distance between the newest position and any earlier one."""
    w = np.asarray(recent_positions, dtype=float).reshape(-1, 2)
    if len(w) < 2:
        return 0.0
    d = w - w[-1]
    return float(np.hypot(d[:, 0], d[:, 1]).max())


def detect_lmp(f_res, rho_t: float, recent_positions: Optional[Sequence], gains: ApfGains) -> bool:
    """Decide whether an agent is trapped in a local minimum.

    Trapped means away from its goal (``rho_t > eps_goal``) and either the
    resultant force is below ``eps_lmp`` or the agent has barely moved
    over a full ``stall_window`` of recent positions.
    """
    if rho_t <= gains.eps_goal:
        return False
    f = np.asarray(f_res, dtype=float)
    if float(np.hypot(f[0], f[1])) < gains.eps_lmp:
        return True
    if recent_positions is None or len(recent_positions) < gains.stall_window:
        return False
    return window_displacement(recent_positions) < gains.stall_tol


def srm_perturbation(gains: ApfGains, rng: np.random.Generator) -> np.ndarray:
    """Random-direction vector of length ``gains.gamma_srm``."""
    theta = rng.uniform(-np.pi, np.pi)
    return gains.gamma_srm * np.array([np.cos(theta), np.sin(theta)])
