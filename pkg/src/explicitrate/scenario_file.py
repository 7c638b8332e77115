"""YAML scenario files.

A scenario file has the sections ``params``, ``links``, ``flows`` and the
optional ``events``, ``initial_actual``, ``monitors`` and ``policy``::

    # explicitrate-scenario v1
    params:
      k: 1/2                  # feedback-to-forward rate ratio
      control_interval: 1
      d_bound: 8              # optional; smallest valid bound when omitted
      seed: 3
      duration: 100
      jitter: 1/4             # optional extra per-hop delay, drawn from the seed
    links:
      - {from: a, to: b, capacity: 100, delay: 1, both: true, back_capacity: 80}
    flows:
      - {id: f1, path: [a, b], demand: inf}
      - {id: f2, path: [b, a], demand: 30, start: 0, stop: 50}
    events:
      - {at: 20, join: f3}
      - {at: 70, leave: f1}
    initial_actual: {f1: 10}
    monitors: {m_consistency: true, fair_share: true, round_trip: true}
    policy: {delayed_increase: true}

Rates and times are integers, decimals or ``a/b`` strings, all read
exactly; a demand may be ``inf``.  ``both: true`` also creates the reverse
link, with ``back_capacity`` if given.  Events add join and leave times to
a flow; a flow is active from 0 unless its first event is a join.  Sorted joins
and leaves pair up into active periods, so a flow may leave and re-enter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Union

import yaml

from .model import DirectedLink, FlowSpec, ScenarioConfig, ScenarioError, as_rate, as_time
from .simulator import Monitors

__all__ = ["ScenarioFile", "ScenarioSyntaxError", "load_scenario_file", "loads_scenario", "parse_scenario"]

HEADER = "# explicitrate-scenario v1"

_SECTIONS = {"params", "links", "flows", "events", "initial_actual", "monitors", "policy"}
_PARAMS = {"k", "control_interval", "d_bound", "seed", "duration", "jitter"}
_LINK_KEYS = {"from", "to", "capacity", "delay", "both", "back_capacity"}
_FLOW_KEYS = {"id", "path", "demand", "start", "stop"}


class ScenarioSyntaxError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


@dataclass
class ScenarioFile:
    config: ScenarioConfig
    monitors: Monitors = field(default_factory=Monitors)
    delayed_increase: bool = True


def _exact(value, what, errors, time=False):
    try:
        return as_time(value) if time else as_rate(value)
    except (TypeError, ValueError, ZeroDivisionError):
        errors.append(f"{what}: not an exact number: {value!r}")
        return Fraction(0)


def loads_scenario(text: str) -> ScenarioFile:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ScenarioSyntaxError(
            str(exc.problem or exc.context), mark.line + 1 if mark else None, mark.column + 1 if mark else None
        ) from None
    except yaml.YAMLError as exc:
        raise ScenarioSyntaxError(str(exc)) from None
    if not isinstance(doc, dict):
        raise ScenarioSyntaxError("scenario must be a mapping of sections")

    errors: list[str] = []
    for key in doc:
        if key not in _SECTIONS:
            errors.append(f"unknown section {key!r}")

    params = doc.get("params") or {}
    for key in params:
        if key not in _PARAMS:
            errors.append(f"unknown parameter {key!r}")
    kwargs = {}
    for key in ("k", "control_interval", "duration", "jitter"):
        if key in params:
            kwargs[key] = _exact(params[key], key, errors, time=key != "k")
    if "d_bound" in params and params["d_bound"] not in (None, "auto"):
        kwargs["d_bound"] = _exact(params["d_bound"], "d_bound", errors, time=True)
    if "seed" in params:
        if isinstance(params["seed"], int) and not isinstance(params["seed"], bool):
            kwargs["seed"] = params["seed"]
        else:
            errors.append(f"seed: not an integer: {params['seed']!r}")

    links = []
    for i, item in enumerate(doc.get("links") or []):
        if not isinstance(item, dict):
            errors.append(f"links[{i}]: expected a mapping")
            continue
        errors += [f"links[{i}]: unknown key {key!r}" for key in item if key not in _LINK_KEYS]
        if "from" not in item or "to" not in item or "capacity" not in item:
            errors.append(f"links[{i}]: needs from, to and capacity")
            continue
        src, dst = str(item["from"]), str(item["to"])
        capacity = _exact(item["capacity"], f"links[{i}].capacity", errors)
        delay = _exact(item.get("delay", 0), f"links[{i}].delay", errors, time=True)
        links.append(DirectedLink(src, dst, capacity, delay))
        if item.get("both"):
            back = _exact(item.get("back_capacity", item["capacity"]), f"links[{i}].back_capacity", errors)
            links.append(DirectedLink(dst, src, back, delay))

    flows: dict[str, dict] = {}
    for i, item in enumerate(doc.get("flows") or []):
        if not isinstance(item, dict):
            errors.append(f"flows[{i}]: expected a mapping")
            continue
        errors += [f"flows[{i}]: unknown key {key!r}" for key in item if key not in _FLOW_KEYS]
        if "id" not in item or not isinstance(item.get("path"), list):
            errors.append(f"flows[{i}]: needs id and a path list of nodes")
            continue
        fid = str(item["id"])
        if fid in flows:
            errors.append(f"duplicate flow {fid}")
        flows[fid] = {
            "nodes": [str(n) for n in item["path"]],
            "demand": _exact(item.get("demand", "inf"), f"flows[{i}].demand", errors),
            "joins": [_exact(item["start"], f"flows[{i}].start", errors, time=True)] if "start" in item else [],
            "leaves": []
            if item.get("stop") in (None, "never")
            else [_exact(item["stop"], f"flows[{i}].stop", errors, time=True)],
            "explicit_start": "start" in item,
        }

    for i, item in enumerate(doc.get("events") or []):
        if not isinstance(item, dict) or "at" not in item or len(item) != 2:
            errors.append(f"events[{i}]: expected {{at: time, join|leave: flow}}")
            continue
        at = _exact(item["at"], f"events[{i}].at", errors, time=True)
        action = next(k for k in item if k != "at")
        fid = str(item[action])
        slot = {"join": "joins", "leave": "leaves"}.get(action)
        if slot is None:
            errors.append(f"events[{i}]: unknown action {action!r}")
        elif fid not in flows:
            errors.append(f"events[{i}]: unknown flow {fid}")
        else:
            flows[fid][slot].append(at)

    specs = []
    for fid, f in flows.items():
        joins, leaves = sorted(f["joins"]), sorted(f["leaves"])
        if not f["explicit_start"] and (not joins or (leaves and leaves[0] < joins[0])):
            joins.insert(0, Fraction(0))  # active from the start
        if len(leaves) not in (len(joins), len(joins) - 1):
            errors.append(f"flow {fid}: {len(joins)} join(s) but {len(leaves)} leave(s)")
            continue
        periods = list(zip(joins, leaves + [None]))
        specs.append(
            FlowSpec.from_path(
                fid, f["nodes"], demand=f["demand"], start=periods[0][0], stop=periods[0][1],
                rejoins=tuple(periods[1:]),
            )
        )

    initial = {}
    for fid, value in (doc.get("initial_actual") or {}).items():
        initial[str(fid)] = _exact(value, f"initial_actual.{fid}", errors)

    monitors = Monitors()
    for key, value in (doc.get("monitors") or {}).items():
        if not hasattr(monitors, key):
            errors.append(f"unknown monitor {key!r}")
        else:
            setattr(monitors, key, bool(value))
    delayed_increase = bool((doc.get("policy") or {}).get("delayed_increase", True))

    if errors:
        raise ScenarioError(errors)
    config = ScenarioConfig(links=tuple(links), flows=tuple(specs), initial_actual=initial, **kwargs)
    return ScenarioFile(config, monitors, delayed_increase)


def load_scenario_file(path: Union[str, Path]) -> ScenarioFile:
    return loads_scenario(Path(path).read_text())


def parse_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Read a scenario file; semantic checks are left to ``validate_scenario``."""
    return load_scenario_file(path).config
