import math
from pathlib import Path

import numpy as np
import pytest

from formation_sim.simulation import TrajectoryLog

REPO = Path(__file__).resolve().parents[1]
SCENARIO_DIR = REPO / "scenarios"

# Published setup shared by the three built-in experiments.
OBSTACLES = [[0, 1.5], [4, 3], [3, 8.8], [7, 5], [15, 16]]
TARGET = [14, 14]
K_MAX = 800
RHO_M = 1.0

S3 = math.sqrt(3)
PUBLISHED = {
    "triangle": {
        "initial": [[-4, -1.5, 0], [-2.5, -4, math.pi / 4], [-6, -2.6, -math.pi / 4]],
        "adjacency": [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
        "offsets_rows": [[-1.5, -1.5, 0], [1.5, -1.5, 0]],
    },
    "square": {
        "initial": [[-6, -0.5, 0], [-4, -4.5, math.pi / 4], [-3, -3, -math.pi / 4], [-3.5, -2, math.pi / 4]],
        "adjacency": [[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]],
        "offsets_rows": [[-3, -3, 0, 0], [0, -3, -3, 0]],
    },
    "hexagon": {
        "initial": [
            [-4, -1.5, 0],
            [-2.5, -4, math.pi / 4],
            [-6, -2.4, -math.pi / 4],
            [-5, -2, math.pi / 4],
            [-3, -1.5, math.pi / 6],
            [-2, -3, -math.pi / 6],
        ],
        "adjacency": [
            [0, 1, 0, 0, 0, 1],
            [1, 0, 1, 0, 0, 0],
            [0, 1, 0, 1, 0, 0],
            [0, 0, 1, 0, 1, 0],
            [0, 0, 0, 1, 0, 1],
            [1, 0, 0, 0, 1, 0],
        ],
        "offsets_rows": [[-1, -3, -4, -3, -1, 0], [S3, S3, 0, -S3, -S3, 0]],
    },
}


def published_offsets(name):
    return np.array(PUBLISHED[name]["offsets_rows"], dtype=float).T


def make_log(positions, obstacles=(), target=(0.0, 0.0), edges=(), desired=(), leader=-1, dt=1.0, mode="lilf"):
    """Build a TrajectoryLog from a position history with brute-force metrics."""
    pos = np.asarray(positions, dtype=float)
    k, n, _ = pos.shape
    obstacles = np.asarray(obstacles, dtype=float).reshape(-1, 2)
    leader = leader % n
    min_agent = []
    min_obs = []
    for q in pos:
        pairs = [math.dist(q[i], q[j]) for i in range(n) for j in range(i + 1, n)]
        min_agent.append(min(pairs) if pairs else math.inf)
        dists = [math.dist(p, o) for p in q for o in obstacles]
        min_obs.append(min(dists) if dists else math.inf)
    zeros = np.zeros((k, n, 2))
    return TrajectoryLog(
        positions=pos,
        headings=np.zeros((k, n)),
        inputs=zeros,
        f_att=zeros,
        f_rep=zeros,
        srm=np.zeros((k, n), dtype=bool),
        lmp=np.zeros((k, n), dtype=bool),
        lyapunov=np.zeros(k),
        min_agent_distance=np.array(min_agent),
        min_obstacle_distance=np.array(min_obs),
        leader_target_distance=np.array([math.dist(q[leader], target) for q in pos]),
        outcome="not_arrived",
        arrival_step=None,
        dt=dt,
        control_mode=mode,
        leader_index=leader,
        edges=list(edges),
        desired_distances=np.asarray(desired, dtype=float),
        obstacles=obstacles,
        target=np.asarray(target, dtype=float),
    )


# Acceptance results, printed at the end of the session.
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    def report(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
