"""Scenario configuration: YAML loading, validation and serialization.

Validation errors carry the line of the offending entry in the source file.
Bundled scenarios live in the ``scenarios`` package directory and can be
loaded by name.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ScenarioError
from .estimator import (
    CircularProfile,
    LinearProfile,
    SensorModel,
    StaticProfile,
    TargetModel,
)
from .planner import PlannerParams
from .world import Workspace

STRATEGIES = ("intermittent", "heuristic", "all-time")


@dataclass
class TargetSpec:
    x0: tuple[float, float, float]
    xhat0: tuple[float, float, float]
    profile: dict
    process_noise: float

    def model(self) -> TargetModel:
        kind = self.profile.get("kind", "static")
        if kind == "static":
            prof = StaticProfile(tuple(self.x0))
        elif kind == "linear":
            pts = [tuple(self.x0)] + [tuple(map(float, w)) for w in self.profile["waypoints"]]
            prof = LinearProfile(tuple(pts), float(self.profile["speed"]))
        elif kind == "circular":
            prof = CircularProfile.through(
                self.x0, float(self.profile["radius"]), float(self.profile["period"]),
                float(self.profile.get("phase", 0.0)),
            )
        else:
            raise ScenarioError(f"unknown target profile kind {kind!r}")
        return TargetModel(np.eye(3), np.eye(3), self.process_noise * np.eye(3), prof)


@dataclass
class Scenario:
    name: str
    workspace: Workspace
    robots: dict[int, tuple[float, float]]
    teams: list[list[int]]
    targets: list[TargetSpec]
    sensor: SensorModel = field(default_factory=SensorModel)
    planner: PlannerParams = field(default_factory=PlannerParams)
    C0: float = 0.25
    dt: int = 1
    t_end: int = 500
    seed: int = 0
    strategy: str = "intermittent"
    schedule: dict[int, int] | None = None
    formation_spacing: float = 0.75
    meeting_spacing: float = 0.75
    max_resample: int = 100

    @property
    def models(self) -> list[TargetModel]:
        return [t.model() for t in self.targets]

    @property
    def x0(self) -> np.ndarray:
        return np.array([t.x0 for t in self.targets], dtype=float)

    @property
    def xhat0(self) -> np.ndarray:
        return np.array([t.xhat0 for t in self.targets], dtype=float).reshape(-1)

    def replace(self, **kw) -> "Scenario":
        s = copy.deepcopy(self)
        for k, v in kw.items():
            if k == "planner":
                s.planner = v
            elif not hasattr(s, k):
                raise AttributeError(k)
            else:
                setattr(s, k, v)
        return s

    def subset_targets(self, idx) -> "Scenario":
        return self.replace(targets=[copy.deepcopy(self.targets[i]) for i in idx])


# -- serialization ------------------------------------------------------------

_PLANNER_KEYS = ("n_sample", "B", "eps", "gamma", "delta", "u_max", "max_near", "extend_once")
_SENSOR_KEYS = ("max_range", "near", "far", "sigma_near", "slope", "intercept", "sigma_far")


def to_dict(s: Scenario) -> dict:
    ws = s.workspace
    return {
        "name": s.name,
        "strategy": s.strategy,
        "seed": s.seed,
        "t_end": s.t_end,
        "dt": s.dt,
        "workspace": {
            "bounds": [float(b) for b in ws.bounds],
            "z_bounds": [float(b) for b in ws.z_bounds],
            "comm_range": float(ws.comm_range),
            "sense_range": float(ws.sense_range),
            "clearance": float(ws.clearance),
            "obstacles": [[[float(c) for c in p] for p in seg] for seg in ws.obstacles],
        },
        "sensor": {k: float(getattr(s.sensor, k)) for k in _SENSOR_KEYS},
        "planner": {k: getattr(s.planner, k) for k in _PLANNER_KEYS},
        "estimator": {"C0": float(s.C0)},
        "robots": {int(r): [float(c) for c in p] for r, p in s.robots.items()},
        "teams": [[int(r) for r in team] for team in s.teams],
        "schedule": None if s.schedule is None else {int(k): int(v) for k, v in s.schedule.items()},
        "targets": [
            {
                "x0": [float(c) for c in t.x0],
                "xhat0": [float(c) for c in t.xhat0],
                "process_noise": float(t.process_noise),
                "profile": copy.deepcopy(t.profile),
            }
            for t in s.targets
        ],
        "baselines": {
            "formation_spacing": float(s.formation_spacing),
            "meeting_spacing": float(s.meeting_spacing),
            "max_resample": int(s.max_resample),
        },
    }


def dumps(s: Scenario) -> str:
    return yaml.safe_dump(to_dict(s), sort_keys=False, default_flow_style=None)


def dump(s: Scenario, path) -> None:
    Path(path).write_text(dumps(s))


class _Lines:
    """Maps key paths like ``("targets", 3, "x0")`` to source lines."""

    def __init__(self, text: str):
        try:
            self.root = yaml.compose(text)
        except yaml.YAMLError:
            self.root = None

    def line(self, path) -> int | None:
        node = self.root
        best = node
        for key in path:
            if isinstance(node, yaml.MappingNode):
                nxt = None
                for k, v in node.value:
                    if str(k.value) == str(key):
                        nxt = v
                        best = k
                        break
                node = nxt
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int):
                node = node.value[key] if key < len(node.value) else None
            else:
                node = None
            if node is None:
                break
            best = node
        return None if best is None else best.start_mark.line + 1


def _fail(lines: _Lines, source: str, path, msg: str):
    ln = lines.line(path)
    where = f"{source}:{ln}" if ln else source
    dotted = ".".join(str(p) for p in path)
    raise ScenarioError(f"{where}: {dotted}: {msg}")


def _vec(lines, source, path, value, n) -> tuple[float, ...]:
    try:
        arr = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        _fail(lines, source, path, f"expected {n} numbers, got {value!r}")
    if len(arr) != n:
        _fail(lines, source, path, f"expected {n} numbers, got {len(arr)}")
    return arr


def from_dict(d: dict, text: str = "", source: str = "<config>") -> Scenario:
    lines = _Lines(text)
    if not isinstance(d, dict):
        raise ScenarioError(f"{source}: top level must be a mapping")
    for key in ("workspace", "robots", "teams", "targets"):
        if key not in d:
            _fail(lines, source, (), f"missing required section {key!r}")

    w = d["workspace"]
    try:
        obstacles = np.array(w.get("obstacles", []), dtype=float).reshape(-1, 2, 2)
    except ValueError:
        _fail(lines, source, ("workspace", "obstacles"), "each obstacle is [[x1, y1], [x2, y2]]")
    try:
        ws = Workspace(
            bounds=_vec(lines, source, ("workspace", "bounds"), w.get("bounds", (0, 10, 0, 10)), 4),
            obstacles=obstacles,
            comm_range=float(w.get("comm_range", 0.2)),
            sense_range=float(w.get("sense_range", 5.0)),
            z_bounds=_vec(lines, source, ("workspace", "z_bounds"), w.get("z_bounds", (0, 5)), 2),
            clearance=float(w.get("clearance", 0.05)),
        )
    except ValueError as exc:
        _fail(lines, source, ("workspace",), str(exc))

    sensor = SensorModel(**{k: float(v) for k, v in (d.get("sensor") or {}).items()})
    pd = dict(d.get("planner") or {})
    unknown = set(pd) - set(_PLANNER_KEYS)
    if unknown:
        _fail(lines, source, ("planner", sorted(unknown)[0]), "unknown planner parameter")
    try:
        planner = PlannerParams(**pd)
    except (TypeError, ValueError) as exc:
        _fail(lines, source, ("planner",), str(exc))

    robots = {}
    for r, p in (d["robots"] or {}).items():
        pos = _vec(lines, source, ("robots", r), p, 2)
        if not ws.is_free(pos):
            _fail(lines, source, ("robots", r), f"start {pos} is not in free space")
        robots[int(r)] = pos

    teams = []
    for i, team in enumerate(d["teams"]):
        members = [int(r) for r in team]
        for r in members:
            if r not in robots:
                _fail(lines, source, ("teams", i), f"robot {r} has no start position")
        teams.append(members)
    in_team = {r for team in teams for r in team}
    for r in robots:
        if r not in in_team:
            _fail(lines, source, ("robots", r), "robot belongs to no team")

    targets = []
    for a, t in enumerate(d["targets"]):
        x0 = _vec(lines, source, ("targets", a, "x0"), t.get("x0"), 3)
        xh = _vec(lines, source, ("targets", a, "xhat0"), t.get("xhat0", x0), 3)
        xmin, xmax, ymin, ymax = ws.bounds
        zmin, zmax = ws.z_bounds
        if not (xmin <= x0[0] <= xmax and ymin <= x0[1] <= ymax and zmin <= x0[2] <= zmax):
            _fail(lines, source, ("targets", a, "x0"), "initial position outside the workspace")
        q = float(t.get("process_noise", 1e-4))
        if q <= 0:
            _fail(lines, source, ("targets", a, "process_noise"), "must be positive")
        spec = TargetSpec(x0, xh, dict(t.get("profile") or {"kind": "static"}), q)
        try:
            spec.model()
        except (KeyError, ValueError, ScenarioError) as exc:
            _fail(lines, source, ("targets", a, "profile"), f"invalid profile: {exc}")
        targets.append(spec)

    strategy = d.get("strategy", "intermittent")
    if strategy not in STRATEGIES:
        _fail(lines, source, ("strategy",), f"unknown strategy {strategy!r}")
    sched = d.get("schedule")
    b = d.get("baselines") or {}
    return Scenario(
        name=str(d.get("name", Path(source).stem)),
        workspace=ws,
        robots=robots,
        teams=teams,
        targets=targets,
        sensor=sensor,
        planner=planner,
        C0=float((d.get("estimator") or {}).get("C0", 0.25)),
        dt=int(d.get("dt", 1)),
        t_end=int(d.get("t_end", 500)),
        seed=int(d.get("seed", 0)),
        strategy=strategy,
        schedule=None if sched is None else {int(k): int(v) for k, v in sched.items()},
        formation_spacing=float(b.get("formation_spacing", 0.75)),
        meeting_spacing=float(b.get("meeting_spacing", 0.75)),
        max_resample=int(b.get("max_resample", 100)),
    )


def loads(text: str, source: str = "<config>") -> Scenario:
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ScenarioError(f"{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    return from_dict(d, text, source)


def bundled_names() -> list[str]:
    pkg = resources.files("intermittent_dse") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".yaml"))


def load(path_or_name) -> Scenario:
    """Load a scenario file, or a bundled scenario by name."""
    p = Path(path_or_name)
    if p.is_file():
        return loads(p.read_text(), str(p))
    name = str(path_or_name)
    res = resources.files("intermittent_dse") / "scenarios" / f"{name}.yaml"
    if res.is_file():
        return loads(res.read_text(), f"{name}.yaml")
    raise ScenarioError(f"no such config file or bundled scenario: {path_or_name}")


def values_equal(a: Any, b: Any) -> bool:
    """Structural equality used by the round-trip check."""
    return to_dict(a) == to_dict(b)
