import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intermittent_dse import team_graph as tg
from intermittent_dse.errors import DisconnectedTeamGraph, RobotNotInTwoTeams

from helpers import CYCLE8, WHEEL5, random_team_lists


def nx_graph(g: tg.TeamGraph) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(range(g.M))
    G.add_edges_from(g.adjacency)
    return G


def test_cycle_build():
    g = tg.build(CYCLE8)
    assert g.M == 8 and g.N == 8
    assert all(g.degree(i) == 2 for i in range(8))


def test_wheel_hub_degree():
    g = tg.build(WHEEL5)
    assert g.M == 5
    assert g.degree(4) == 4
    assert all(g.degree(i) == 3 for i in range(4))


def test_duplicate_team_rejected():
    with pytest.raises(RobotNotInTwoTeams):
        tg.build([[11, 111], [11, 111]])


def test_robot_in_three_teams_rejected():
    with pytest.raises(RobotNotInTwoTeams) as exc:
        tg.build([[1, 2], [1, 3], [1, 2, 3]])
    assert exc.value.robot == 1


def test_robot_in_one_team_rejected():
    with pytest.raises(RobotNotInTwoTeams):
        tg.build([[1, 2], [2, 3], [3, 1, 4]])


def test_disconnected_rejected():
    teams = [[1, 2], [1, 3], [2, 3], [4, 5], [4, 6], [5, 6]]
    with pytest.raises(DisconnectedTeamGraph) as exc:
        tg.build(teams)
    assert exc.value.components == [[0, 1, 2], [3, 4, 5]]


def test_single_team_is_allowed():
    g = tg.build([[1, 2, 3]])
    assert g.M == 1 and g.adjacency == frozenset()
    assert tg.longest_shortest_path(g) == 1


@pytest.mark.parametrize("teams, L", [(CYCLE8, 5), (WHEEL5, 3), ([[1, 2], [2, 3], [3, 1]], 2)])
def test_longest_shortest_path(teams, L):
    g = tg.build(teams)
    assert tg.longest_shortest_path(g) == L
    assert nx.diameter(nx_graph(g)) + 1 == L


def test_delay_bounds():
    assert tg.delay_bound(tg.build(CYCLE8), 2) == 5
    assert tg.delay_bound(tg.build([[1, 2], [2, 3], [3, 1]]), 3) == 4
    wheel = tg.build(WHEEL5)
    assert tg.delay_bound(wheel, 3) == 6
    assert tg.delay_bound_edges(wheel, 3) == 4


def test_delay_bound_needs_period_two():
    with pytest.raises(ValueError):
        tg.delay_bound(tg.build(CYCLE8), 1)


def test_shared_robots_and_lookup():
    g = tg.build(CYCLE8)
    assert g.shared_robots(0, 1) == frozenset({12})
    assert g.teams_of(18) == (0, 7)
    assert g.has_edge(7, 0) and not g.has_edge(0, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_graph_invariants(seed):
    teams = random_team_lists(np.random.default_rng(seed))
    g = tg.build(teams)
    for r in g.robots:
        assert sum(r in t for t in g.teams) == 2
    for i in range(g.M):
        for j in range(g.M):
            if i != j:
                assert g.has_edge(i, j) == bool(g.teams[i] & g.teams[j])
                assert g.has_edge(i, j) == g.has_edge(j, i)
    L = tg.longest_shortest_path(g)
    assert L == nx.diameter(nx_graph(g)) + 1
    for T in range(2, 6):
        assert tg.delay_bound(g, T) == (T - 1) * L
