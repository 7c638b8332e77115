from fractions import Fraction as F
from pathlib import Path

import pytest

from explicitrate import scenarios
from explicitrate.model import INF, ScenarioError, validate_scenario
from explicitrate.scenario_file import ScenarioSyntaxError, load_scenario_file, loads_scenario, parse_scenario

SHIPPED = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL = """\
# explicitrate-scenario v1
links:
  - {from: a, to: b, capacity: 10, both: true}
flows:
  - {id: f, path: [a, b]}
"""


def test_minimal(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text(MINIMAL)
    config = parse_scenario(path)
    assert [link.id for link in config.links] == ["a->b", "b->a"]
    assert config.flows[0].demand == INF
    validate_scenario(config)


def test_exact_numbers():
    doc = loads_scenario(
        """
params: {k: 1/3, control_interval: 0.1, duration: 7/2, jitter: "0.25"}
links: [{from: a, to: b, capacity: 2.5, delay: 1/8, both: true, back_capacity: 1/3}]
flows: [{id: 1, path: [a, b], demand: 3/7, start: 1/2}]
"""
    )
    c = doc.config
    assert (c.k, c.control_interval, c.duration, c.jitter) == (F(1, 3), F(1, 10), F(7, 2), F(1, 4))
    assert [l.capacity for l in c.links] == [F(5, 2), F(1, 3)]
    assert c.links[0].delay == F(1, 8)
    assert c.flows[0].id == "1" and c.flows[0].demand == F(3, 7) and c.flows[0].start == F(1, 2)


def test_inf_demand():
    doc = loads_scenario(MINIMAL.replace("path: [a, b]}", "path: [a, b], demand: inf}"))
    assert doc.config.flows[0].demand == INF


def test_negative_k_is_semantic():
    config = loads_scenario(MINIMAL + "params: {k: -1}\n").config
    with pytest.raises(ScenarioError, match="k must be >= 0"):
        validate_scenario(config)


def test_syntax_error_position():
    with pytest.raises(ScenarioSyntaxError) as info:
        loads_scenario("links:\n  - {from: a, to: b\nflows: []\n")
    assert info.value.line == 3 and info.value.column is not None


@pytest.mark.parametrize(
    "text, fragment",
    [
        (MINIMAL + "extra: 1\n", "unknown section"),
        (MINIMAL + "params: {speed: 1}\n", "unknown parameter"),
        (MINIMAL.replace("both: true", "both: true, colour: red"), "unknown key"),
        (MINIMAL.replace("capacity: 10", "capacity: ten"), "not an exact number"),
        (MINIMAL + "events: [{at: 1, join: g}]\n", "unknown flow g"),
        (MINIMAL + "events: [{at: 1, pause: f}]\n", "unknown action"),
        (MINIMAL + "events: [{at: 1, leave: f}, {at: 2, leave: f}]\n", r"2 leave\(s\)"),
        (MINIMAL + "monitors: {typo: true}\n", "unknown monitor"),
        (MINIMAL + "params: {seed: 1.5}\n", "seed"),
    ],
    ids=["section", "param", "link-key", "number", "event-flow", "event-action", "unpaired", "monitor", "seed"],
)
def test_rejections(text, fragment):
    with pytest.raises(ScenarioError, match=fragment):
        loads_scenario(text)


def test_not_a_mapping():
    with pytest.raises(ScenarioSyntaxError):
        loads_scenario("- just\n- a list\n")


def test_events_build_periods():
    doc = loads_scenario(
        MINIMAL + "events: [{at: 4, leave: f}, {at: 9, join: f}, {at: 12, leave: f}, {at: 20, join: f}]\n"
    )
    flow = doc.config.flows[0]
    assert flow.periods == ((0, 4), (9, 12), (20, None))


def test_first_event_join():
    flow = loads_scenario(MINIMAL + "events: [{at: 5, join: f}]\n").config.flows[0]
    assert flow.periods == ((5, None),)


def test_monitors_and_policy():
    doc = loads_scenario(MINIMAL + "monitors: {fair_share: false}\npolicy: {delayed_increase: false}\n")
    assert doc.monitors.fair_share is False and doc.monitors.m_consistency is True
    assert doc.delayed_increase is False


@pytest.mark.parametrize(
    "name, build",
    [
        ("single_link", scenarios.single_link),
        ("chain", scenarios.chain),
        ("feedback_pair", scenarios.feedback_pair),
        ("finite_demand", scenarios.finite_demand),
        ("dynamic_experiment", scenarios.dynamic_experiment),
    ],
)
def test_shipped_files_match_builders(name, build):
    path = SHIPPED / f"{name}.yaml"
    assert path.read_text().startswith("# explicitrate-scenario v1\n")
    assert validate_scenario(load_scenario_file(path).config) == build()
