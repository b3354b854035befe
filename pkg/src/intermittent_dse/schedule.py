"""Conflict-free periodic communication schedules.

A schedule assigns every team a slot in ``1..T``; a robot in teams ``i`` and
``j`` communicates with team ``i`` at epochs ``slot(i) + nT`` and with team
``j`` at ``slot(j) + nT``, and is idle otherwise. Conflict-freeness is a proper
vertex coloring of the graph of teams.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import UnknownRobot, UnknownTeam
from .team_graph import RobotId, TeamGraph

IDLE = None


@dataclass(frozen=True)
class Schedule:
    period: int
    slots: Mapping[int, int]
    sequences: Mapping[RobotId, tuple[int | None, ...]]

    def slot(self, team: int) -> int:
        try:
            return self.slots[team]
        except KeyError:
            raise UnknownTeam(team) from None


def from_slots(g: TeamGraph, slots: Mapping[int, int], period: int | None = None) -> Schedule:
    """Derive per-robot sequences from a team-to-slot assignment."""
    slots = {int(k): int(v) for k, v in slots.items()}
    if period is None:
        period = max(slots.values())
    sequences = {}
    for r in g.robots:
        seq: list[int | None] = [IDLE] * period
        for i in g.teams_of(r):
            s = slots[i]
            if 1 <= s <= period and seq[s - 1] is IDLE:
                seq[s - 1] = i
        sequences[r] = tuple(seq)
    return Schedule(period=period, slots=slots, sequences=sequences)


def synthesize(g: TeamGraph) -> Schedule:
    """Greedy coloring in descending-degree order (ties by team index).

    Uses at most ``max_degree + 1`` slots; the period is the number of slots
    actually used.
    """
    order = sorted(range(g.M), key=lambda i: (-g.degree(i), i))
    slots: dict[int, int] = {}
    for i in order:
        taken = {slots[j] for j in g.neighbors(i) if j in slots}
        s = 1
        while s in taken:
            s += 1
        slots[i] = s
    return from_slots(g, slots)


def event_at(s: Schedule, robot: RobotId, k: int) -> int | None:
    """Team the robot meets at epoch ``k`` (1-based), or ``IDLE``."""
    if k < 1:
        raise ValueError(f"epochs start at 1, got {k}")
    try:
        seq = s.sequences[robot]
    except KeyError:
        raise UnknownRobot(robot) from None
    return seq[(k - 1) % s.period]


def team_epochs(s: Schedule, team: int, horizon: int) -> list[int]:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return list(range(s.slot(team), horizon + 1, s.period))


def teams_at(s: Schedule, k: int) -> list[int]:
    """Teams that communicate at epoch ``k``, in index order."""
    phase = (k - 1) % s.period + 1
    return sorted(i for i, slot in s.slots.items() if slot == phase)


def validate(s: Schedule, g: TeamGraph) -> bool:
    if set(s.slots) != set(range(g.M)):
        return False
    if any(not 1 <= v <= s.period for v in s.slots.values()):
        return False
    for i, j in g.adjacency:
        if s.slots[i] == s.slots[j]:
            return False
    if set(s.sequences) != set(g.robots):
        return False
    for r in g.robots:
        seq = s.sequences[r]
        if len(seq) != s.period:
            return False
        mine = g.teams_of(r)
        for i in mine:
            positions = [k for k, e in enumerate(seq) if e == i]
            if positions != [s.slots[i] - 1]:
                return False
        if any(e is not IDLE and e not in mine for e in seq):
            return False
    return True
