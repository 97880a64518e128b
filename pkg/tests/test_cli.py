import json

import numpy as np
import pytest

from ncorbifold.cli import main
from ncorbifold.io import read_dense_matrix, write_dense_matrix
from ncorbifold.scenario import ScenarioError, build_scenario, bundled_scenarios, dumps, endpoint_value, \
    load_scenario

FIXTURES = bundled_scenarios()

SMALL = {
    "schema_version": 1,
    "name": "small",
    "groups": [{"id": "Z2", "kind": "cyclic", "order": 2}],
    "graphs": [{"id": "P", "kind": "explicit", "vertices": ["a", "b", "c", "d"],
                "edges": [["a", "b", 1.0], ["b", "c", 1.0], ["c", "d", 1.0], ["d", "a", 1.0]]}],
    "actions": [{"id": "flip", "group": "Z2", "graph": "P", "kind": "table",
                 "table": {"0": ["a", "b", "c", "d"], "1": ["c", "d", "a", "b"]}}],
    "bitorsors": [{"id": "q", "kind": "quotient", "action": "flip"}],
    "tasks": [{"type": "validate", "bitorsor": "q"}],
}


def write(tmp_path, obj, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj, indent=2))
    return p


def test_bundled_fixtures_load():
    assert set(FIXTURES) == {"reflection_c6", "rotation_quotient", "corrupted_bitorsor"}
    sc = load_scenario(FIXTURES["reflection_c6"])
    assert len(sc.groups) == 1 and len(sc.graphs) == 1
    assert sc.groups["Z2"].order == 2 and sc.graphs["C6"].n_vertices == 6


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_round_trip(name):
    sc = load_scenario(FIXTURES[name])
    again = build_scenario(json.loads(dumps(sc)))
    assert again.spec == sc.spec
    assert dumps(again) == dumps(sc)


def test_explicit_labels_resolve(tmp_path):
    sc = load_scenario(write(tmp_path, SMALL))
    assert sc.bitorsors["q"].left_groupoid.n_points == 2


def test_missing_action_entry(tmp_path):
    bad = json.loads(json.dumps(SMALL))
    del bad["actions"][0]["table"]["1"]
    with pytest.raises(ScenarioError) as exc:
        load_scenario(write(tmp_path, bad))
    assert exc.value.kind == "unresolved reference" and exc.value.line is not None
    assert "group element 1" in str(exc.value)


def test_duplicate_vertex(tmp_path):
    bad = json.loads(json.dumps(SMALL))
    bad["graphs"][0]["vertices"] = ["a", "b", "c", "a"]
    with pytest.raises(ScenarioError) as exc:
        load_scenario(write(tmp_path, bad))
    assert exc.value.kind == "invariant violation" and "twice" in str(exc.value)


def test_unknown_reference(tmp_path):
    bad = json.loads(json.dumps(SMALL))
    bad["bitorsors"][0]["action"] = "nope"
    with pytest.raises(ScenarioError) as exc:
        load_scenario(write(tmp_path, bad))
    assert exc.value.kind == "unresolved reference"


def test_endpoint_expressions():
    assert endpoint_value("n/2", 16) == 8
    assert endpoint_value("n/4+1", 16) == 5
    assert endpoint_value(3, 16) == 3
    with pytest.raises(ScenarioError):
        endpoint_value("n*2", 16)


def test_exit_codes(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["validate", "--scenario", str(FIXTURES["reflection_c6"]), "--out", str(out)]) == 0
    assert main(["validate", "--scenario", str(FIXTURES["corrupted_bitorsor"]), "--out", str(out)]) == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{\n  \"name\": \n")
    assert main(["validate", "--scenario", str(broken), "--out", str(out)]) == 2
    assert "broken.json:" in capsys.readouterr().err
    assert main(["theorem3", "--scenario", str(FIXTURES["corrupted_bitorsor"]), "--out", str(out)]) == 2
    assert main(["validate", "--scenario", str(tmp_path / "missing.json"), "--out", str(out)]) == 2


def test_report_and_artifacts(tmp_path):
    out = tmp_path / "o"
    assert main(["spectrum", "--scenario", str(FIXTURES["rotation_quotient"]), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema_version"] == "1.0" and rep["passed"]
    for task in rep["tasks"]:
        for fn in task["artifacts"]:
            assert (out / fn).is_file()
            if fn.endswith(".txt"):
                m = read_dense_matrix(out / fn)
                assert m.shape[0] == m.shape[1]


def test_byte_identical_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["distance", "--scenario", str(FIXTURES["reflection_c6"]), "--out", str(d)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert any(n.endswith(".csv") for n in names)
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_morita_task(tmp_path):
    out = tmp_path / "o"
    assert main(["morita", "--scenario", str(FIXTURES["reflection_c6"]), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["tasks"][0]["result"]["M5"]["passed"]


def test_convention_override(tmp_path):
    out = tmp_path / "o"
    assert main(["validate", "--scenario", str(FIXTURES["rotation_quotient"]), "--out", str(out),
                 "--convention", "normalized"]) == 0
    assert json.loads((out / "report.json").read_text())["convention"] == "normalized"


def test_dense_matrix_round_trip(tmp_path, rng):
    m = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    write_dense_matrix(tmp_path / "m.txt", m)
    assert np.array_equal(read_dense_matrix(tmp_path / "m.txt"), m)
    (tmp_path / "bad.txt").write_text("1 2\n")
    with pytest.raises(ValueError):
        read_dense_matrix(tmp_path / "bad.txt")
