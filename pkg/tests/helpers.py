"""Shared generators for tests."""

from __future__ import annotations

import numpy as np

CYCLE8 = [[12, 18], [12, 23], [23, 34], [34, 45], [45, 56], [56, 67], [67, 78], [78, 18]]
WHEEL5 = [[12, 14, 15], [12, 23, 25], [23, 34, 35], [34, 14, 45], [15, 25, 35, 45]]


def random_team_lists(rng: np.random.Generator, max_teams: int = 20) -> list[list[int]]:
    """Random connected team structure with every robot in exactly two teams.

    Robots are the edges of a connected multigraph on the teams: a random
    spanning tree plus a few extra edges.
    """
    m = int(rng.integers(3, max_teams + 1))
    edges = [(int(rng.integers(0, v)), v) for v in range(1, m)]
    for _ in range(int(rng.integers(0, m + 1))):
        a, b = rng.choice(m, size=2, replace=False)
        edges.append((int(a), int(b)))
    teams: list[list[int]] = [[] for _ in range(m)]
    for robot, (a, b) in enumerate(edges):
        teams[a].append(robot)
        teams[b].append(robot)
    return teams


def trivial_scenario(t_end: int = 60, n_robots: int = 2, **kw):
    """One team, no obstacles, one static target near the robots."""
    from intermittent_dse.planner import PlannerParams
    from intermittent_dse.scenario import Scenario, TargetSpec
    from intermittent_dse.world import Workspace

    robots = {r + 1: (2.0 + 0.1 * r, 2.0) for r in range(n_robots)}
    target = TargetSpec((3.0, 3.0, 1.0), (3.2, 2.9, 1.1), {"kind": "static"}, 1e-4)
    params = dict(
        name="trivial",
        workspace=Workspace(bounds=(0, 6, 0, 6)),
        robots=robots,
        teams=[list(robots)],
        targets=[target],
        planner=PlannerParams(n_sample=60),
        t_end=t_end,
    )
    params.update(kw)
    return Scenario(**params)


def exact_propagation_violations(log, D: int) -> list[tuple]:
    """(team, epoch) pairs whose fused set misses a record from epoch <= k - D.

    Works from the full fused key sets stored on each event, independently
    of the prefix summaries used by ``check_propagation``.
    """
    by_team: dict = {}
    for ev in log.events:
        by_team.setdefault(ev.team, []).append(ev)
    out = []
    for team, evs in sorted(by_team.items()):
        evs.sort(key=lambda e: e.epoch)
        for k in range(1, log.complete_epoch + 1):
            cur = [e for e in evs if e.epoch <= k]
            held = cur[-1].fused_keys if cur else frozenset()
            need = {r.key for r in log.records if log.labels[r.key] <= k - D}
            if not need <= held:
                out.append((team, k))
    return out
