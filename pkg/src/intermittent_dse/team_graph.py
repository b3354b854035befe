"""Robot teams and the graph of teams.

Two teams are adjacent when they share at least one robot. Every robot
belongs to exactly two teams, except in the degenerate single-team network
where every robot belongs to the one team.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DisconnectedTeamGraph, RobotNotInTwoTeams

RobotId = int


@dataclass(frozen=True)
class TeamGraph:
    teams: tuple[frozenset[RobotId], ...]
    adjacency: frozenset[tuple[int, int]]

    @property
    def M(self) -> int:
        return len(self.teams)

    @property
    def N(self) -> int:
        return len(self.robots)

    @property
    def robots(self) -> tuple[RobotId, ...]:
        return tuple(sorted(set().union(*self.teams)))

    def neighbors(self, i: int) -> list[int]:
        out = [b for a, b in self.adjacency if a == i] + [a for a, b in self.adjacency if b == i]
        return sorted(out)

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def max_degree(self) -> int:
        return max((self.degree(i) for i in range(self.M)), default=0)

    def teams_of(self, robot: RobotId) -> tuple[int, ...]:
        return tuple(i for i, team in enumerate(self.teams) if robot in team)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.adjacency

    def shared_robots(self, i: int, j: int) -> frozenset[RobotId]:
        return self.teams[i] & self.teams[j]


def build(teams: Sequence[Iterable[RobotId]]) -> TeamGraph:
    """Build the graph of teams and check the membership invariants.

    Raises:
        RobotNotInTwoTeams: a robot is not in exactly two distinct teams
            (for ``M >= 2``), or teams are duplicated.
        DisconnectedTeamGraph: the graph of teams has several components.
    """
    if not teams:
        raise ValueError("at least one team is required")
    sets = tuple(frozenset(int(r) for r in team) for team in teams)
    if any(not s for s in sets):
        raise ValueError("teams must be nonempty")

    members: dict[RobotId, list[int]] = {}
    for i, team in enumerate(sets):
        for r in team:
            members.setdefault(r, []).append(i)

    for r in sorted(members):
        idx = members[r]
        distinct = {sets[i] for i in idx}
        if len(sets) == 1:
            continue
        if len(idx) != 2 or len(distinct) != 2:
            raise RobotNotInTwoTeams(r, len(distinct))

    adjacency = frozenset(
        (i, j)
        for i in range(len(sets))
        for j in range(i + 1, len(sets))
        if sets[i] & sets[j]
    )
    g = TeamGraph(teams=sets, adjacency=adjacency)
    comps = components(g)
    if len(comps) > 1:
        raise DisconnectedTeamGraph(comps)
    return g


def components(g: TeamGraph) -> list[set[int]]:
    seen: set[int] = set()
    comps = []
    for start in range(g.M):
        if start in seen:
            continue
        comp = set(_bfs_dist(g, start))
        seen |= comp
        comps.append(comp)
    return comps


def _bfs_dist(g: TeamGraph, start: int) -> dict[int, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def longest_shortest_path(g: TeamGraph) -> int:
    """Largest number of *nodes* on a shortest path between two teams."""
    return max(max(_bfs_dist(g, i).values()) for i in range(g.M)) + 1


def delay_bound(g: TeamGraph, period: int) -> int:
    """Worst-case propagation delay in epochs, ``(T - 1) * L``."""
    if period < 1 or (period < 2 and g.M > 1):
        raise ValueError(f"period must be >= 2 for a multi-team network, got {period}")
    return (period - 1) * longest_shortest_path(g)


def delay_bound_edges(g: TeamGraph, period: int) -> int:
    """Same bound with L counted in edges instead of nodes."""
    return (period - 1) * (longest_shortest_path(g) - 1)
