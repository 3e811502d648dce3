import csv
import json
import math

import numpy as np
import pytest

from formation_sim.exceptions import ParseError, UnknownScenario, ValidationError
from formation_sim.scenarios import (
    BUILTIN_NAMES,
    CSV_COLUMNS,
    apply_overrides,
    builtin_scenario,
    export_trajectory,
    load_scenario,
    parse_scenario,
    randomize_initial,
    read_trajectory_csv,
    read_trajectory_json,
    save_scenario,
    summarize,
)
from formation_sim.simulation import run

from conftest import K_MAX, OBSTACLES, PUBLISHED, RHO_M, SCENARIO_DIR, TARGET, make_log, published_offsets

MINIMAL = {
    "agents": [[0, 0], [1, 0]],
    "formation": {"offsets": [[-1, 0], [0, 0]]},
    "environment": {"obstacles": [[5, 5]]},
}


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtin_matches_published_values(name):
    s = builtin_scenario(name)
    c = s.config
    pub = PUBLISHED[name]
    assert np.array_equal(c.environment.obstacles, OBSTACLES)
    assert c.environment.rho_m == RHO_M
    assert np.array_equal(c.environment.target, TARGET)
    assert c.k_max == K_MAX
    assert np.array_equal(c.topology.adjacency, pub["adjacency"])
    assert np.array_equal(c.formation.offsets, published_offsets(name))
    assert c.formation.leader_index == len(pub["initial"]) - 1
    for state, (x, y, heading) in zip(c.initial_states, pub["initial"]):
        assert state.position.tolist() == [x, y]
        assert state.heading == heading
    assert s.provenance["environment.obstacles"] == "published"
    assert s.provenance["control.epsilon"] == "tuned"


def test_builtin_shapes():
    t = builtin_scenario("triangle")
    assert t.config.topology.n == 3 and t.config.formation.leader_index == 2
    assert len(t.config.topology.edges) == 3
    h = builtin_scenario("hexagon")
    assert h.config.topology.edges == [(0, 1), (0, 5), (1, 2), (2, 3), (3, 4), (4, 5)]
    sq = builtin_scenario("square")
    d = sq.config.formation.desired_distances(sq.config.topology.edges)
    np.testing.assert_allclose(d, 3.0)


def test_unknown_builtin():
    with pytest.raises(UnknownScenario):
        builtin_scenario("pentagon")


def test_minimal_file_gets_defaults(tmp_path):
    path = tmp_path / "mini.json"
    path.write_text(json.dumps(MINIMAL))
    s = load_scenario(path)
    c = s.config
    assert s.name == "mini"
    assert c.topology.n == 2 and c.topology.edges == [(0, 1)]
    assert c.k_max == 800 and c.dt == 1.0 and c.control_mode == "lilf"
    assert c.apf.eps_goal == 0.5 and c.apf.stall_window == 50
    assert c.apf.stall_tol == pytest.approx(1e-4)
    assert c.srm_enabled and c.srm_mode == "add"
    assert c.rho_a == 0.5


def test_asymmetric_adjacency_is_validation_error():
    data = dict(MINIMAL, topology={"adjacency": [[0, 1], [0, 0]]})
    with pytest.raises(ValidationError, match="NotSymmetric"):
        parse_scenario(json.dumps(data))


def test_parse_error_reports_line():
    with pytest.raises(ParseError, match="line 3"):
        parse_scenario('{\n "agents": [],\n oops\n}')


@pytest.mark.parametrize(
    "patch, error",
    [
        ({"bogus": 1}, ParseError),
        ({"sim": {"k_maxx": 3}}, ParseError),
        ({"sim": {"k_max": 0}}, ValidationError),
        ({"srm": {"gamma": 1.5}}, ValidationError),
        ({"control": {"mode": "boids"}}, ValidationError),
        ({"agents": [[0, 0]]}, ValidationError),
    ],
)
def test_bad_fields(patch, error):
    data = {**MINIMAL, **patch}
    with pytest.raises(error):
        parse_scenario(json.dumps(data))


def test_missing_required_fields():
    with pytest.raises(ParseError, match="agents"):
        parse_scenario(json.dumps({"formation": {"offsets": [[0, 0]]}}))
    with pytest.raises(ParseError, match="formation.offsets"):
        parse_scenario(json.dumps({"agents": [[0, 0]]}))


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_round_trip(name, tmp_path):
    s = builtin_scenario(name)
    path = tmp_path / f"{name}.json"
    save_scenario(s, path)
    assert load_scenario(path) == s


def test_repo_scenarios_load():
    for path in sorted(SCENARIO_DIR.glob("*.json")):
        s = load_scenario(path)
        assert s.name == path.stem


def test_overrides():
    s = apply_overrides(builtin_scenario("triangle"), ["srm.enabled=false", "sim.seed=7", "control.epsilon=2.5"])
    assert s.config.srm_enabled is False
    assert s.config.seed == 7
    assert s.config.control.epsilon == 2.5
    s = apply_overrides(builtin_scenario("triangle"), ["environment.obstacles=[]"])
    assert s.config.environment.m == 0
    for bad in ("srm.enabled", "nope.x=1", "sim.k_max=[1]"):
        with pytest.raises(ParseError):
            apply_overrides(builtin_scenario("triangle"), [bad])


def test_override_rho_m_rederives_radii():
    s = apply_overrides(builtin_scenario("triangle"), ["environment.rho_m=0.8"])
    assert s.config.rho_a == 0.8
    assert s.config.apf.stall_tol == pytest.approx(0.8e-4)


def test_randomize_initial_is_seeded():
    base = builtin_scenario("square")
    a = randomize_initial(base, 2.0)
    b = randomize_initial(base, 2.0)
    assert a == b
    centre = base.config.initial_positions.mean(axis=0)
    assert np.all(np.linalg.norm(a.config.initial_positions - centre, axis=1) <= 2.0)
    assert not np.array_equal(a.config.initial_positions, base.config.initial_positions)


def test_csv_tiny_log(tmp_path):
    log = make_log([[[0.0, 0.0]], [[1.0, 0.5]]])
    path = export_trajectory(log, tmp_path / "t.csv")
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3
    assert rows[2][:4] == ["1", "0", "1.0", "0.5"]


def test_csv_row_count_and_flags(tmp_path):
    log = run(builtin_scenario("triangle").config)
    path = export_trajectory(log, tmp_path / "t.csv")
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == (log.arrival_step + 1) * 3
    assert {r["srm"] for r in rows} <= {"0", "1"}
    assert all(r["lmp"] == "1" for r in rows if r["srm"] == "1")
    paths = read_trajectory_csv(path)
    np.testing.assert_array_equal(paths[2], log.positions[:, 2])


def test_csv_srm_column_marks_lmp_steps(tmp_path):
    log = run(load_scenario(SCENARIO_DIR / "lmp_trap.json").config)
    path = export_trajectory(log, tmp_path / "t.csv")
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    srm_rows = [r for r in rows if r["srm"] == "1"]
    assert srm_rows and all(r["lmp"] == "1" for r in srm_rows)


def test_csv_is_byte_identical(tmp_path):
    cfg = builtin_scenario("hexagon").config
    a = export_trajectory(run(cfg), tmp_path / "a.csv").read_bytes()
    b = export_trajectory(run(cfg), tmp_path / "b.csv").read_bytes()
    assert a == b


def test_json_export(tmp_path):
    log = run(builtin_scenario("triangle").config)
    path = export_trajectory(log, tmp_path / "t.json", "json")
    data = json.loads(path.read_text())
    assert data["arrival_step"] == log.arrival_step
    assert len(data["steps"]) == log.final_k + 1
    assert set(data["steps"][0]) >= {"positions", "inputs", "f_att", "f_rep", "srm", "lmp", "lyapunov"}
    np.testing.assert_array_equal(read_trajectory_json(path)[0], log.positions[:, 0])


def test_summary_for_stationary_log(tmp_path):
    s = builtin_scenario("triangle")
    log = make_log(np.tile([[0.0, 0.0], [3.0, 0.0]], (4, 1, 1)))
    summary = summarize(log, s, tmp_path / "s.json")
    assert summary["arrival_step"] == "NotArrived"
    assert summary["srm_triggers"] == 0
    assert json.loads((tmp_path / "s.json").read_text())["outcome"] == "not_arrived"


def test_summary_obstacle_free_consensus():
    s = load_scenario(SCENARIO_DIR / "consensus_line.json")
    summary = summarize(run(s.config), s)
    assert summary["safety"]["min_obstacle_distance"] is None
    assert summary["outcome"] == "completed"


def test_summary_triangle_arrives():
    s = builtin_scenario("triangle")
    summary = summarize(run(s.config), s)
    assert summary["arrival_step"] < 800
    assert summary["provenance"]["sim.k_max"] == "published"
    assert math.isfinite(summary["lyapunov"]["V_final"])
