"""Sampling-based informative path planning in a team's joint configuration space.

A node holds one planar position and one integer arrival time per agent. The
tree grows like RRT*, except that steering slows down the agents that are
ahead in time, a new node may only attach to a parent without increasing the
spread of arrival times, and rewiring is restricted to synchronized nodes.
Goal nodes are configurations where the team's disk graph is connected, all
agents arrive together and the constraint target is certain enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NoGoalFound
from .estimator import CostContext, NodeBelief, interpolate, path_cost
from .world import Workspace, joint_collision_free


@dataclass(frozen=True)
class PlannerParams:
    n_sample: int = 200
    B: int | None = None
    eps: float = 1.0
    gamma: float = 5.0
    delta: float = 0.12 ** 2
    u_max: float = 0.1
    max_near: int | None = 12
    extend_once: bool = True

    def __post_init__(self):
        for name in ("n_sample", "eps", "gamma", "delta", "u_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def n_explore(self) -> int:
        return int(round(0.3 * self.n_sample)) if self.B is None else self.B


@dataclass
class JointConfig:
    positions: np.ndarray
    arrival: np.ndarray
    cost: float = 0.0
    parent: int | None = None
    belief: NodeBelief | None = None
    children: list = field(default_factory=list)
    connected: bool = False

    @property
    def delay(self) -> int:
        return int(self.arrival.max() - self.arrival.min())

    @property
    def t(self) -> int:
        return int(self.arrival.min())


# -- geometry helpers ---------------------------------------------------------


def laplacian(positions: np.ndarray, R: float) -> np.ndarray:
    P = np.asarray(positions, dtype=float)
    d = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    A = ((d <= R) & ~np.eye(len(P), dtype=bool)).astype(float)
    return np.diag(A.sum(axis=1)) - A


def fiedler_value(positions: np.ndarray, R: float) -> float:
    """Second smallest Laplacian eigenvalue of the disk graph of radius ``R``."""
    P = np.asarray(positions, dtype=float)
    if len(P) < 2:
        return 0.0
    return float(np.linalg.eigvalsh(laplacian(P, R))[1])


def disk_connected(positions: np.ndarray, R: float) -> bool:
    return len(positions) == 1 or fiedler_value(positions, R) > 1e-9


def sensor_points(positions: np.ndarray, offsets: np.ndarray | None) -> np.ndarray:
    if offsets is None:
        return positions
    return (positions[:, None, :] + offsets).reshape(-1, 2)


def arrival_from(parent: JointConfig, positions: np.ndarray, u_max: float) -> np.ndarray:
    """Earliest integer arrival at ``positions`` moving at most ``u_max`` per step."""
    d = np.linalg.norm(positions - parent.positions, axis=1)
    steps = np.ceil(d / u_max - 1e-9).astype(np.int64)
    return parent.arrival + np.maximum(steps, 0)


# -- sampling and steering ----------------------------------------------------


def sample(it: int, rng: np.random.Generator, params: PlannerParams, workspace: Workspace,
           team_size: int) -> np.ndarray:
    """Exploration samples first, then samples clustered around a meeting point."""
    xmin, xmax, ymin, ymax = workspace.bounds
    if it <= params.n_explore:
        return np.column_stack([
            rng.uniform(xmin, xmax, team_size), rng.uniform(ymin, ymax, team_size)
        ])
    q = workspace.sample_free(rng)
    std = 2.0 * workspace.comm_range
    out = np.empty((team_size, 2))
    lo = (xmin, ymin)
    hi = (xmax, ymax)
    for r in range(team_size):
        for c in range(2):
            v = q[c] + std * rng.standard_normal()
            while not lo[c] <= v <= hi[c]:
                v = q[c] + std * rng.standard_normal()
            out[r, c] = v
    return out


def steer(nearest: JointConfig, target: np.ndarray, params: PlannerParams):
    """Time-matching step toward ``target``; ``None`` if no agent can move.

    Every agent gets the common step budget ``floor(s / u_max)`` minus how far
    ahead of the slowest agent it already is; agents with no budget stay.
    """
    d = np.asarray(target, dtype=float) - nearest.positions
    norms = np.linalg.norm(d, axis=1)
    s = float(np.min(np.minimum(params.eps, norms)))
    dt_s = int(math.floor(s / params.u_max + 1e-9))
    if dt_s <= 0:
        return None
    dt_c = dt_s - (nearest.arrival - nearest.arrival.min())
    pos = nearest.positions.copy()
    arr = nearest.arrival.copy()
    move = dt_c > 0
    unit = d[move] / norms[move, None]
    pos[move] = nearest.positions[move] + (params.u_max * dt_c[move])[:, None] * unit
    arr[move] = nearest.arrival[move] + dt_c[move]
    return pos, arr


def near_radius(n: int, dim: int, params: PlannerParams) -> float:
    if n < 2:
        return 4.0 * params.eps
    return min(params.gamma * (math.log(n) / n) ** (1.0 / dim), 4.0 * params.eps)


# -- tree ---------------------------------------------------------------------


class PlanTree:
    def __init__(self, root: JointConfig, ctx: CostContext, workspace: Workspace,
                 params: PlannerParams, rng: np.random.Generator):
        self.ctx = ctx
        self.workspace = workspace
        self.params = params
        self.rng = rng
        self.n_agents = len(root.positions)
        root.cost = 0.0
        root.parent = None
        root.connected = disk_connected(root.positions, workspace.comm_range)
        self.nodes: list[JointConfig] = [root]
        self._flat = np.zeros((64, 2 * self.n_agents))
        self._flat[0] = root.positions.reshape(-1)
        self.t_root = int(root.arrival.max())
        self.root_uncertainty = root.belief.target_uncertainty()

    # bookkeeping

    def _append(self, node: JointConfig) -> int:
        idx = len(self.nodes)
        if idx >= len(self._flat):
            self._flat = np.vstack([self._flat, np.zeros_like(self._flat)])
        self._flat[idx] = node.positions.reshape(-1)
        self.nodes.append(node)
        if node.parent is not None:
            self.nodes[node.parent].children.append(idx)
        return idx

    def nearest(self, positions: np.ndarray) -> int:
        d = np.linalg.norm(self._flat[:len(self.nodes)] - positions.reshape(-1), axis=1)
        return int(np.argmin(d))

    def near(self, positions: np.ndarray) -> list[int]:
        n = len(self.nodes)
        r = near_radius(n, 2 * self.n_agents, self.params)
        d = np.linalg.norm(self._flat[:n] - positions.reshape(-1), axis=1)
        idx = np.flatnonzero(d <= r)
        idx = idx[np.argsort(d[idx], kind="stable")]
        if self.params.max_near is not None:
            idx = idx[:self.params.max_near]
        return [int(i) for i in idx]

    def ancestors(self, idx: int) -> set[int]:
        out = set()
        p = self.nodes[idx].parent
        while p is not None:
            out.add(p)
            p = self.nodes[p].parent
        return out

    def edge_free(self, a: np.ndarray, b: np.ndarray) -> bool:
        off = self.ctx.offsets
        return joint_collision_free(sensor_points(a, off), sensor_points(b, off), self.workspace)

    def edge_cost(self, parent: JointConfig, positions, arrival):
        return path_cost(parent.belief, parent.positions, parent.arrival, positions, arrival,
                         self.ctx)

    # extend and rewire

    def extend(self, positions: np.ndarray, arrival: np.ndarray, nearest: int,
               near: Sequence[int]) -> int:
        """Insert a node at ``positions`` under the cheapest admissible parent."""
        par = self.nodes[nearest]
        inc, nb = self.edge_cost(par, positions, arrival)
        best = (par.cost + inc, nearest, arrival, nb)
        for j in near:
            if j == nearest:
                continue
            cand = self.nodes[j]
            arr = arrival_from(cand, positions, self.params.u_max)
            if arr.max() - arr.min() > cand.delay:
                continue
            if not self.edge_free(cand.positions, positions):
                continue
            inc, nb = self.edge_cost(cand, positions, arr)
            if cand.cost + inc < best[0] - 1e-12:
                best = (cand.cost + inc, j, arr, nb)
        cost, parent, arr, nb = best
        node = JointConfig(positions, arr, cost, parent, nb,
                           connected=disk_connected(positions, self.workspace.comm_range))
        return self._append(node)

    def rewire(self, new: int, near: Sequence[int]) -> list[int]:
        """Reattach synchronized near nodes through ``new`` when strictly cheaper."""
        v_new = self.nodes[new]
        blocked = self.ancestors(new) | {new}
        changed = []
        for j in near:
            if j in blocked or j == 0:
                continue
            v = self.nodes[j]
            if v.delay != 0:
                continue
            arr = arrival_from(v_new, v.positions, self.params.u_max)
            if arr.max() != arr.min():
                continue
            if not self.edge_free(v_new.positions, v.positions):
                continue
            inc, nb = self.edge_cost(v_new, v.positions, arr)
            if v_new.cost + inc < v.cost - 1e-12:
                self.nodes[v.parent].children.remove(j)
                v_new.children.append(j)
                v.parent = new
                shift = int(arr[0] - v.arrival[0])
                v.arrival = arr
                v.cost = v_new.cost + inc
                v.belief = nb
                self._propagate(j, shift)
                changed.append(j)
        return changed

    def _propagate(self, idx: int, shift: int) -> None:
        stack = list(self.nodes[idx].children)
        while stack:
            c = stack.pop()
            child = self.nodes[c]
            par = self.nodes[child.parent]
            child.arrival = child.arrival + shift
            inc, nb = self.edge_cost(par, child.positions, child.arrival)
            child.cost = par.cost + inc
            child.belief = nb
            stack.extend(child.children)

    def recompute_cost(self, idx: int) -> float:
        """Root-to-node cost computed from scratch along the stored path."""
        chain = self.path_indices(idx)
        nb = self.nodes[0].belief
        total = 0.0
        for a, b in zip(chain[:-1], chain[1:]):
            pa, pb = self.nodes[a], self.nodes[b]
            inc, nb = path_cost(nb, pa.positions, pa.arrival, pb.positions, pb.arrival, self.ctx)
            total += inc
        return total

    def path_indices(self, idx: int) -> list[int]:
        chain = [idx]
        while self.nodes[chain[-1]].parent is not None:
            chain.append(self.nodes[chain[-1]].parent)
        return chain[::-1]

    # goal set

    def is_goal(self, idx: int, target: int | None) -> bool:
        v = self.nodes[idx]
        if idx == 0 or not v.connected or v.delay != 0 or v.t <= self.t_root:
            return False
        if target is None:
            return True
        lam = float(np.linalg.eigvalsh(v.belief.P[target])[-1])
        return lam <= self.params.delta

    def goal_nodes(self, target: int | None) -> list[int]:
        return [i for i in range(1, len(self.nodes)) if self.is_goal(i, target)]

    def constraint_order(self) -> list[int]:
        return [int(a) for a in np.argsort(-self.root_uncertainty, kind="stable")]

    def grow(self, it: int) -> int | None:
        x = sample(it, self.rng, self.params, self.workspace, self.n_agents)
        i_near = self.nearest(x)
        stepped = steer(self.nodes[i_near], x, self.params)
        if stepped is None:
            return None
        pos, arr = stepped
        if not self.edge_free(self.nodes[i_near].positions, pos):
            return None
        near = self.near(pos)
        new = self.extend(pos, arr, i_near, near)
        self.rewire(new, near)
        return new

    def dump(self, path) -> None:
        """Write the node table as tab-separated text."""
        with open(path, "w") as fh:
            fh.write("index\tparent\tcost\tdelay\tconnected\tarrival\tpositions\n")
            for i, v in enumerate(self.nodes):
                fh.write(
                    f"{i}\t{'' if v.parent is None else v.parent}\t{v.cost:.12g}\t{v.delay}\t"
                    f"{int(v.connected)}\t{','.join(map(str, v.arrival.tolist()))}\t"
                    f"{','.join(f'{c:.6f}' for c in v.positions.reshape(-1))}\n"
                )


@dataclass
class PlanResult:
    goal: int
    t_f: int
    cost: float
    waypoints: list[tuple[np.ndarray, np.ndarray]]
    constraint_target: int | None
    relaxation: str
    tree: PlanTree

    @property
    def end_positions(self) -> np.ndarray:
        return np.stack([w[1][-1] for w in self.waypoints])


def extract_waypoints(tree: PlanTree, goal: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-agent integer times and positions from the root to ``goal``."""
    chain = tree.path_indices(goal)
    out = []
    for r in range(tree.n_agents):
        t0 = int(tree.nodes[0].arrival[r])
        times = [np.array([t0])]
        pos = [tree.nodes[0].positions[r][None, :]]
        for a, b in zip(chain[:-1], chain[1:]):
            u, v = tree.nodes[a], tree.nodes[b]
            ta, tb = int(u.arrival[r]), int(v.arrival[r])
            if tb > ta:
                ts = np.arange(ta + 1, tb + 1)
                times.append(ts)
                pos.append(interpolate(u.positions[r], ta, v.positions[r], tb, ts))
        out.append((np.concatenate(times), np.vstack(pos)))
    return out


def select_goal(tree: PlanTree) -> tuple[int, int | None, str] | None:
    """Cheapest goal, relaxing the uncertainty constraint step by step."""
    order = tree.constraint_order()
    base = tree.goal_nodes(None)
    if not base:
        return None
    costs = {i: tree.nodes[i].cost for i in base}
    for rank, a in enumerate(order):
        ok = [i for i in base if tree.is_goal(i, a)]
        if ok:
            best = min(ok, key=lambda i: (costs[i], i))
            return best, a, "none" if rank == 0 else f"target_rank_{rank}"
    best = min(base, key=lambda i: (costs[i], i))
    return best, None, "dropped"


def plan(root: JointConfig, ctx: CostContext, workspace: Workspace, params: PlannerParams,
         rng: np.random.Generator, dump_path=None) -> PlanResult:
    """Grow a tree from ``root`` and return the cheapest goal path.

    Raises:
        NoGoalFound: no connected, synchronized node exists even after one
            extra round of ``n_sample`` iterations.
    """
    tree = PlanTree(root, ctx, workspace, params, rng)
    it = 0
    rounds = 2 if params.extend_once else 1
    chosen = None
    for _ in range(rounds):
        for _ in range(params.n_sample):
            it += 1
            tree.grow(it)
        chosen = select_goal(tree)
        if chosen is not None:
            break
    if dump_path is not None:
        tree.dump(dump_path)
    if chosen is None:
        raise NoGoalFound(
            f"no connected synchronized configuration after {it} samples ({len(tree.nodes)} nodes)"
        )
    goal, target, relax = chosen
    v = tree.nodes[goal]
    return PlanResult(goal, v.t, v.cost, extract_waypoints(tree, goal), target, relax, tree)


def make_root(positions, arrival, belief: NodeBelief, ctx: CostContext,
              pending_t=None, pending_q=None) -> JointConfig:
    """Root node; ``belief`` is taken at its own time and advanced to the
    earliest root arrival, fusing any supplied pending measurements on the way."""
    positions = np.asarray(positions, dtype=float)
    arrival = np.asarray(arrival, dtype=np.int64)
    nb = NodeBelief(
        belief.t, belief.P.copy(),
        np.zeros(0, dtype=np.int64) if pending_t is None else np.asarray(pending_t, dtype=np.int64),
        np.zeros((0, 2)) if pending_q is None else np.asarray(pending_q, dtype=float),
    )
    if int(arrival.min()) < nb.t:
        raise ValueError("root arrival precedes its belief time")
    _, nb = path_cost(nb, positions, arrival, positions, arrival, ctx)
    return JointConfig(positions, arrival, 0.0, None, nb)
