"""Scenario files, built-in experiments and trajectory export.

A scenario is one JSON document. Every section is optional except
``agents`` and ``formation.offsets``; omitted fields take the defaults in
:data:`DEFAULTS`. Agent indices are 0-based throughout.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import analysis
from .control import ControlGains, FormationSpec
from .exceptions import FormationError, ParseError, TopologyError, UnknownScenario, ValidationError
from .potential import ApfGains, Environment
from .simulation import AgentState, SimConfig, TrajectoryLog
from .topology import complete_adjacency, validate_topology

BUILTIN_NAMES = ("triangle", "square", "hexagon")

CSV_COLUMNS = ("k", "agent", "x", "y", "ux", "uy", "fatt_x", "fatt_y", "frep_x", "frep_y", "srm", "lmp")

DEFAULTS: dict[str, dict[str, Any]] = {
    "topology": {"adjacency": None, "mode": "static", "rho_com": None},
    "formation": {"offsets": None, "leader": -1},
    "environment": {"obstacles": [], "rho_m": 1.0, "target": [0.0, 0.0]},
    "apf": {
        "eta": 0.3,
        "k_r": 1.0,
        "eps_lmp": 1e-3,
        "eps_goal": 0.5,
        "stall_window": 50,
        "stall_tol": None,  # 1e-4 * rho_m
        "rho_a": None,  # min(rho_m, half the smallest desired distance)
    },
    "srm": {"enabled": True, "gamma": 0.5, "mode": "add"},
    "control": {"mode": "lilf", "epsilon": 1.0, "gamma": 0.3, "mu": 1.0, "beta": 0.1, "leader_bias": "error"},
    "sim": {"k_max": 800, "dt": 1.0, "seed": 0},
}
TOP_LEVEL = ("name", "description", "agents", "provenance", *DEFAULTS)


@dataclass(eq=False)
class Scenario:
    name: str
    config: SimConfig
    description: str = ""
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return scenario_to_dict(self)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def scenario_to_dict(scenario: Scenario) -> dict:
    c = scenario.config
    return {
        "name": scenario.name,
        "description": scenario.description,
        "agents": [{"position": _floats(s.position), "heading": float(s.heading)} for s in c.initial_states],
        "topology": {
            "adjacency": c.topology.adjacency.tolist(),
            "mode": c.topology.mode,
            "rho_com": c.topology.rho_com,
        },
        "formation": {"offsets": _floats(c.formation.offsets), "leader": c.formation.leader_index},
        "environment": {
            "obstacles": _floats(c.environment.obstacles),
            "rho_m": float(c.environment.rho_m),
            "target": _floats(c.environment.target),
        },
        "apf": {
            "eta": c.apf.eta,
            "k_r": c.apf.k_r,
            "eps_lmp": c.apf.eps_lmp,
            "eps_goal": c.apf.eps_goal,
            "stall_window": c.apf.stall_window,
            "stall_tol": c.apf.stall_tol,
            "rho_a": float(c.rho_a),
        },
        "srm": {"enabled": c.srm_enabled, "gamma": c.apf.gamma_srm, "mode": c.srm_mode},
        "control": {
            "mode": c.control_mode,
            "epsilon": c.control.epsilon,
            "gamma": c.control.gamma,
            "mu": c.control.mu,
            "beta": c.control.beta,
            "leader_bias": c.leader_bias,
        },
        "sim": {"k_max": c.k_max, "dt": c.dt, "seed": c.seed},
        "provenance": dict(scenario.provenance),
    }


def _merged(data: dict) -> dict:
    if not isinstance(data, dict):
        raise ParseError("scenario document must be a JSON object")
    for key in data:
        if key not in TOP_LEVEL:
            raise ParseError(f"unknown field {key!r}")
    out = {}
    for section, defaults in DEFAULTS.items():
        given = data.get(section, {})
        if not isinstance(given, dict):
            raise ParseError(f"field {section!r} must be an object")
        for key in given:
            if key not in defaults:
                raise ParseError(f"unknown field '{section}.{key}'")
        out[section] = {**copy.deepcopy(defaults), **given}
    if "agents" not in data:
        raise ParseError("missing required field 'agents'")
    if out["formation"]["offsets"] is None:
        raise ParseError("missing required field 'formation.offsets'")
    out["agents"] = data["agents"]
    return out


def _agent(entry, k) -> AgentState:
    if isinstance(entry, dict):
        unknown = set(entry) - {"position", "heading"}
        if unknown:
            raise ParseError(f"unknown field 'agents[{k}].{sorted(unknown)[0]}'")
        return AgentState(entry["position"], entry.get("heading", 0.0))
    # bare [x, y] or [x, y, heading]
    entry = list(entry)
    return AgentState(entry[:2], entry[2] if len(entry) > 2 else 0.0)


def scenario_from_dict(data: dict, name: Optional[str] = None) -> Scenario:
    """Build and validate a :class:`Scenario` from a parsed document."""
    d = _merged(data)
    field_name = "agents"
    try:
        states = [_agent(e, k) for k, e in enumerate(d["agents"])]
        n = len(states)
        field_name = "topology"
        topo = d["topology"]
        adjacency = topo["adjacency"] if topo["adjacency"] is not None else complete_adjacency(n)
        try:
            topology = validate_topology(adjacency, topo["mode"], topo["rho_com"])
        except TopologyError as exc:
            raise ValidationError(f"{type(exc).__name__}: {exc}") from exc
        field_name = "formation"
        formation = FormationSpec(d["formation"]["offsets"], int(d["formation"]["leader"]))
        field_name = "environment"
        env = d["environment"]
        environment = Environment(env["obstacles"], float(env["rho_m"]), env["target"])
        field_name = "apf"
        a, srm = d["apf"], d["srm"]
        stall_tol = a["stall_tol"] if a["stall_tol"] is not None else 1e-4 * environment.rho_m
        apf = ApfGains(
            eta=float(a["eta"]),
            k_r=float(a["k_r"]),
            gamma_srm=float(srm["gamma"]),
            eps_lmp=float(a["eps_lmp"]),
            eps_goal=float(a["eps_goal"]),
            stall_window=int(a["stall_window"]),
            stall_tol=float(stall_tol),
        )
        field_name = "control"
        c = d["control"]
        gains = ControlGains(float(c["epsilon"]), float(c["gamma"]), float(c["mu"]), float(c["beta"]))
        field_name = "sim"
        s = d["sim"]
        if not isinstance(srm["enabled"], bool):
            raise ParseError("field 'srm.enabled' must be true or false")
        config = SimConfig(
            topology=topology,
            formation=formation,
            environment=environment,
            initial_states=states,
            apf=apf,
            control=gains,
            control_mode=c["mode"],
            k_max=s["k_max"],
            dt=float(s["dt"]),
            seed=int(s["seed"]),
            rho_a=None if a["rho_a"] is None else float(a["rho_a"]),
            srm_enabled=srm["enabled"],
            srm_mode=srm["mode"],
            leader_bias=c["leader_bias"],
        )
    except (ParseError, ValidationError):
        raise
    except FormationError as exc:
        raise ValidationError(f"{type(exc).__name__} in {field_name!r}: {exc}") from exc
    except (TypeError, KeyError, IndexError) as exc:
        raise ParseError(f"malformed field {field_name!r}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"{field_name!r}: {exc}") from exc
    return Scenario(
        name=str(data.get("name", name or "scenario")),
        config=config,
        description=str(data.get("description", "")),
        provenance=dict(data.get("provenance", {})),
    )


def parse_scenario(text: str, name: Optional[str] = None) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(data, name)


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), name=path.stem)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")


def builtin_scenario(name: str) -> Scenario:
    if name not in BUILTIN_NAMES:
        raise UnknownScenario(f"unknown built-in scenario {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    text = resources.files("formation_sim.data").joinpath(f"{name}.json").read_text()
    return parse_scenario(text, name)


def resolve_scenario(ref: str) -> Scenario:
    """A built-in name or a path to a scenario file."""
    if ref in BUILTIN_NAMES:
        return builtin_scenario(ref)
    path = Path(ref)
    if not path.exists():
        raise UnknownScenario(f"{ref!r} is neither a built-in scenario nor an existing file")
    return load_scenario(path)


def _coerce(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def apply_overrides(scenario: Scenario, assignments) -> Scenario:
    """Return a copy with ``section.key=value`` overrides applied.

    Values are parsed as JSON when possible (``0.2``, ``false``, ``null``)
    and kept as strings otherwise.
    """
    data = scenario.to_dict()
    touched_rho_m = False
    for item in assignments:
        key, sep, raw = item.partition("=")
        parts = key.strip().split(".")
        if not sep or len(parts) != 2 or parts[0] not in DEFAULTS or parts[1] not in DEFAULTS[parts[0]]:
            raise ParseError(f"bad override {item!r}; expected section.field=value")
        value = _coerce(raw)
        if isinstance(value, (list, dict)) and parts[1] not in ("obstacles", "target"):
            raise ParseError(f"override {key!r} must be a scalar")
        data[parts[0]][parts[1]] = value
        touched_rho_m |= key == "environment.rho_m"
    if touched_rho_m:
        # derived radii follow the new obstacle radius unless set explicitly
        explicit = {item.partition("=")[0].strip() for item in assignments}
        for derived in ("apf.rho_a", "apf.stall_tol"):
            if derived not in explicit:
                data["apf"][derived.split(".")[1]] = None
    return scenario_from_dict(data, scenario.name)


def randomize_initial(scenario: Scenario, radius: float, seed: Optional[int] = None) -> Scenario:
    """Copy of ``scenario`` with initial positions drawn uniformly in a disc.

    The disc is centred on the centroid of the configured initial
    positions. Headings are kept.
    """
    config = scenario.config
    rng = np.random.default_rng([config.seed if seed is None else seed, 1])
    centre = config.initial_positions.mean(axis=0)
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, config.topology.n))
    t = rng.uniform(-np.pi, np.pi, config.topology.n)
    pts = centre + np.column_stack([r * np.cos(t), r * np.sin(t)])
    data = scenario.to_dict()
    for entry, p in zip(data["agents"], pts):
        entry["position"] = p.tolist()
    return scenario_from_dict(data, scenario.name)


def _num(x) -> str:
    return repr(float(x))


def trajectory_csv(log: TrajectoryLog) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for k in range(len(log.positions)):
        for i in range(log.n):
            writer.writerow(
                [
                    k,
                    i,
                    _num(log.positions[k, i, 0]),
                    _num(log.positions[k, i, 1]),
                    _num(log.inputs[k, i, 0]),
                    _num(log.inputs[k, i, 1]),
                    _num(log.f_att[k, i, 0]),
                    _num(log.f_att[k, i, 1]),
                    _num(log.f_rep[k, i, 0]),
                    _num(log.f_rep[k, i, 1]),
                    int(log.srm[k, i]),
                    int(log.lmp[k, i]),
                ]
            )
    return buf.getvalue()


def _finite_or_none(values):
    return [float(v) if math.isfinite(v) else None for v in np.asarray(values, dtype=float)]


def trajectory_dict(log: TrajectoryLog) -> dict:
    return {
        "outcome": log.outcome,
        "arrival_step": log.arrival_step,
        "final_k": log.final_k,
        "dt": log.dt,
        "control_mode": log.control_mode,
        "leader_index": log.leader_index,
        "edges": [list(e) for e in log.edges],
        "desired_distances": log.desired_distances.tolist(),
        "obstacles": log.obstacles.tolist(),
        "target": log.target.tolist(),
        "error": log.error,
        "events": log.events,
        "steps": [
            {
                "k": k,
                "positions": log.positions[k].tolist(),
                "headings": log.headings[k].tolist(),
                "inputs": log.inputs[k].tolist(),
                "f_att": log.f_att[k].tolist(),
                "f_rep": log.f_rep[k].tolist(),
                "srm": log.srm[k].astype(int).tolist(),
                "lmp": log.lmp[k].astype(int).tolist(),
                "lyapunov": float(log.lyapunov[k]),
                "min_agent_distance": _finite_or_none([log.min_agent_distance[k]])[0],
                "min_obstacle_distance": _finite_or_none([log.min_obstacle_distance[k]])[0],
                "leader_target_distance": float(log.leader_target_distance[k]),
            }
            for k in range(len(log.positions))
        ],
    }


def export_trajectory(log: TrajectoryLog, path, fmt: str = "csv") -> Path:
    path = Path(path)
    if fmt == "csv":
        text = trajectory_csv(log)
    elif fmt == "json":
        text = json.dumps(trajectory_dict(log), indent=1) + "\n"
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")
    path.write_text(text)
    return path


def read_trajectory_csv(path) -> dict[int, np.ndarray]:
    """Per-agent ``(K, 2)`` position arrays from an exported CSV."""
    paths: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ParseError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for row in reader:
            paths.setdefault(int(row["agent"]), []).append((float(row["x"]), float(row["y"])))
    return {i: np.array(p) for i, p in sorted(paths.items())}


def read_trajectory_json(path) -> dict[int, np.ndarray]:
    data = json.loads(Path(path).read_text())
    pos = np.array([s["positions"] for s in data["steps"]], dtype=float)
    return {i: pos[:, i] for i in range(pos.shape[1])}


def summarize(log: TrajectoryLog, scenario: Scenario, path=None) -> dict:
    metrics = analysis.safety_metrics(log)
    summary = {
        "scenario": scenario.name,
        "outcome": log.outcome,
        "arrival_step": log.arrival_step if log.arrival_step is not None else "NotArrived",
        "final_k": log.final_k,
        "error": log.error,
        "safety": {
            "min_inter_agent_distance": _finite_or_none([metrics.min_inter_agent_distance])[0],
            "min_obstacle_distance": _finite_or_none([metrics.min_obstacle_distance])[0],
            "path_lengths": metrics.path_lengths,
            "terminal_rms_error": metrics.terminal_rms_error,
            "terminal_max_relative_error": metrics.terminal_max_relative_error,
        },
        "lyapunov": analysis.lyapunov_diagnostics(log),
        "srm_triggers": int(log.srm.sum()),
        "lmp_events": int(log.lmp.sum()),
        "provenance": dict(scenario.provenance),
    }
    if path is not None:
        Path(path).write_text(json.dumps(summary, indent=2) + "\n")
    return summary
