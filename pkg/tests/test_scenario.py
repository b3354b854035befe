import pytest

from intermittent_dse.errors import ScenarioError
from intermittent_dse.scenario import bundled_names, dumps, load, loads, values_equal

MINIMAL = """\
name: mini
workspace:
  bounds: [0, 6, 0, 6]
robots:
  1: [1.0, 1.0]
  2: [1.1, 1.0]
teams:
  - [1, 2]
targets:
  - x0: [3.0, 3.0, 1.0]
"""


def test_bundled_scenarios_load():
    names = bundled_names()
    assert {"paper_8x8", "paper_8x8_wheel", "paper_4x4"} <= set(names)
    for n in names:
        sc = load(n)
        assert sc.name == n


@pytest.mark.parametrize("name", ["paper_8x8", "paper_8x8_wheel", "paper_4x4"])
def test_round_trip(name):
    sc = load(name)
    again = loads(dumps(sc))
    assert values_equal(sc, again)
    assert dumps(again) == dumps(sc)


def test_minimal_defaults():
    sc = loads(MINIMAL)
    assert sc.t_end == 500 and sc.C0 == 0.25 and sc.strategy == "intermittent"
    assert sc.targets[0].xhat0 == sc.targets[0].x0


@pytest.mark.parametrize(
    "edit, line, fragment",
    [
        ("  2: [1.1, 1.0]", "  2: [1.1]", "robots.2"),
        ("  - x0: [3.0, 3.0, 1.0]", "  - x0: [30.0, 3.0, 1.0]", "outside the workspace"),
        ("  - [1, 2]", "  - [1, 7]", "robot 7 has no start position"),
    ],
)
def test_diagnostics_name_line(edit, line, fragment):
    text = MINIMAL.replace(edit, line)
    lineno = text.splitlines().index(line) + 1
    with pytest.raises(ScenarioError) as exc:
        loads(text, "bad.yaml")
    msg = str(exc.value)
    assert fragment in msg
    assert msg.startswith(f"bad.yaml:{lineno}: ")


def test_invalid_yaml_and_missing_section():
    with pytest.raises(ScenarioError, match="invalid YAML"):
        loads("a: [1, 2", "x.yaml")
    with pytest.raises(ScenarioError, match="missing required section 'teams'"):
        loads(MINIMAL.replace("teams:\n  - [1, 2]\n", ""))


def test_unknown_planner_key_and_strategy():
    with pytest.raises(ScenarioError, match="unknown planner parameter"):
        loads(MINIMAL + "planner:\n  n_samples: 3\n")
    with pytest.raises(ScenarioError, match="unknown strategy"):
        loads(MINIMAL + "strategy: greedy\n")


def test_missing_file():
    with pytest.raises(ScenarioError, match="no such config"):
        load("/nonexistent/file.yaml")
