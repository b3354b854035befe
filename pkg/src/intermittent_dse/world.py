"""Workspace geometry, ground-truth targets, sensing and geodesic paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import NoPath
from .estimator import DEFAULT_SENSOR, MeasurementRecord, SensorModel, TargetModel
from .geometry import EPS, as_segments, in_bounds, point_segment_distance, segments_blocked


@dataclass
class Workspace:
    bounds: tuple[float, float, float, float] = (0.0, 10.0, 0.0, 10.0)
    obstacles: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    comm_range: float = 0.2
    sense_range: float = 5.0
    z_bounds: tuple[float, float] = (0.0, 5.0)
    clearance: float = 0.05

    def __post_init__(self):
        self.obstacles = as_segments(self.obstacles)
        self.bounds = tuple(float(b) for b in self.bounds)
        xmin, xmax, ymin, ymax = self.bounds
        if xmax <= xmin or ymax <= ymin:
            raise ValueError(f"degenerate bounds {self.bounds}")
        if self.comm_range >= self.diameter:
            raise ValueError("communication range must be smaller than the workspace diameter")
        self._vis = None

    @property
    def diameter(self) -> float:
        xmin, xmax, ymin, ymax = self.bounds
        return math.hypot(xmax - xmin, ymax - ymin)

    def is_free(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        if not in_bounds(p, self.bounds):
            return False
        if len(self.obstacles) == 0:
            return True
        d = point_segment_distance(p, self.obstacles[:, 0], self.obstacles[:, 1])
        return bool(np.all(d > EPS))

    def sample_free(self, rng: np.random.Generator, max_tries: int = 10_000) -> np.ndarray:
        xmin, xmax, ymin, ymax = self.bounds
        for _ in range(max_tries):
            p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
            if self.is_free(p):
                return p
        raise RuntimeError("could not sample a free point")

    # -- geodesics ---------------------------------------------------------

    def _visibility(self):
        if self._vis is None:
            verts = []
            dirs = [(math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)) for k in range(8)]
            for seg in self.obstacles:
                for end in seg:
                    for dx, dy in dirs:
                        p = end + self.clearance * np.array([dx, dy])
                        if not in_bounds(p, self.bounds):
                            continue
                        d = point_segment_distance(p, self.obstacles[:, 0], self.obstacles[:, 1])
                        if np.all(d > 0.5 * self.clearance):
                            verts.append(p)
            V = np.array(verts).reshape(-1, 2)
            n = len(V)
            W = np.zeros((n, n))
            if n:
                ii, jj = np.triu_indices(n, k=1)
                ok = ~segments_blocked(V[ii], V[jj], self.obstacles)
                w = np.linalg.norm(V[ii] - V[jj], axis=1)
                W[ii[ok], jj[ok]] = w[ok]
                W[jj[ok], ii[ok]] = w[ok]
            self._vis = (V, W)
        return self._vis

    def geodesic(self, a, b) -> np.ndarray:
        """Shortest obstacle-avoiding polyline from ``a`` to ``b``.

        Returns an ``(m, 2)`` array of corner points including both ends.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.array_equal(a, b):
            return a[None, :].copy()
        if collision_free(a, b, self):
            return np.vstack([a, b])
        V, W = self._visibility()
        n = len(V)
        pts = np.vstack([V, a, b])
        G = np.zeros((n + 2, n + 2))
        G[:n, :n] = W
        for idx, p in ((n, a), (n + 1, b)):
            if n == 0:
                break
            ok = ~segments_blocked(np.repeat(p[None, :], n, axis=0), V, self.obstacles)
            w = np.linalg.norm(V - p, axis=1)
            w = np.where(w > 0, w, 1e-12)
            G[idx, :n] = np.where(ok, w, 0.0)
            G[:n, idx] = G[idx, :n]
        dist, pred = dijkstra(csr_matrix(G), directed=False, indices=n, return_predecessors=True)
        if not np.isfinite(dist[n + 1]):
            raise NoPath(f"no obstacle-free path from {a.tolist()} to {b.tolist()}")
        path = [n + 1]
        while path[-1] != n:
            path.append(pred[path[-1]])
        return pts[path[::-1]]


def polyline_length(path: np.ndarray) -> float:
    path = np.asarray(path, dtype=float)
    if len(path) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


def follow(path: np.ndarray, t0: int, speed: float) -> tuple[np.ndarray, np.ndarray]:
    """Traverse ``path`` from time ``t0`` at ``speed`` per step.

    Returns integer times ``t0 .. t_arrive`` and the position at each, with
    the last position exactly the end of the path.
    """
    path = np.asarray(path, dtype=float)
    total = polyline_length(path)
    steps = int(math.ceil(total / speed - 1e-9)) if total > 0 else 0
    times = np.arange(t0, t0 + steps + 1)
    if steps == 0:
        return times, path[-1:].copy()
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(path, axis=0), axis=1))])
    s = np.minimum(speed * np.arange(steps + 1), total)
    s[-1] = total
    xs = np.interp(s, cum, path[:, 0])
    ys = np.interp(s, cum, path[:, 1])
    return times, np.column_stack([xs, ys])


# -- predicates ---------------------------------------------------------------


def line_of_sight(p, x, obstacles) -> bool:
    """Whether the planar projection of the sight line from ``p`` to ``x`` is clear."""
    p = np.asarray(p, dtype=float)[:2]
    x = np.asarray(x, dtype=float)[:2]
    return not bool(segments_blocked(p[None, :], x[None, :], obstacles)[0])


def collision_free(a, b, workspace: Workspace) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (in_bounds(a, workspace.bounds) and in_bounds(b, workspace.bounds)):
        return False
    return not bool(segments_blocked(a[None, :], b[None, :], workspace.obstacles)[0])


def joint_collision_free(a: np.ndarray, b: np.ndarray, workspace: Workspace) -> bool:
    """Per-robot check of a joint edge; ``a`` and ``b`` are ``(n, 2)``."""
    if not (np.all(in_bounds(a, workspace.bounds)) and np.all(in_bounds(b, workspace.bounds))):
        return False
    return not bool(np.any(segments_blocked(a, b, workspace.obstacles)))


# -- ground truth -------------------------------------------------------------


@dataclass
class WorldState:
    t: int
    targets: np.ndarray
    robots: dict = field(default_factory=dict)


def _reflect(v: float, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    while v < lo or v > hi:
        v = 2 * lo - v if v < lo else 2 * hi - v
    return v


def step_targets(s: WorldState, models: Sequence[TargetModel], rng: np.random.Generator,
                 workspace: Workspace, max_resample: int = 20) -> WorldState:
    """Advance every target one step with process noise.

    Noise that would carry a target's projection through an obstacle is
    redrawn; if every draw fails the target keeps its planar position.
    """
    xmin, xmax, ymin, ymax = workspace.bounds
    zmin, zmax = workspace.z_bounds
    out = np.empty_like(s.targets)
    for a, m in enumerate(models):
        x = s.targets[a]
        mean = m.step_mean(x, s.t)
        chol = np.linalg.cholesky(np.asarray(m.Q, dtype=float))
        new = None
        for _ in range(max_resample):
            cand = mean + chol @ rng.standard_normal(3)
            cand = np.array([
                _reflect(cand[0], xmin, xmax),
                _reflect(cand[1], ymin, ymax),
                _reflect(cand[2], zmin, zmax),
            ])
            if collision_free(x[:2], cand[:2], workspace):
                new = cand
                break
        if new is None:
            new = np.array([x[0], x[1], _reflect(mean[2], zmin, zmax)])
        out[a] = new
    return WorldState(s.t + 1, out, dict(s.robots))


def simulate_targets(x0, models: Sequence[TargetModel], workspace: Workspace, t_end: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Ground-truth positions for ``t = 0 .. t_end`` as ``(t_end + 1, A, 3)``."""
    x0 = np.asarray(x0, dtype=float).reshape(-1, 3)
    traj = np.empty((t_end + 1, len(x0), 3))
    traj[0] = x0
    s = WorldState(0, x0.copy())
    for t in range(t_end):
        s = step_targets(s, models, rng, workspace)
        traj[t + 1] = s.targets
    return traj


def visible_targets(q, targets: np.ndarray, workspace: Workspace,
                    sensor: SensorModel = DEFAULT_SENSOR) -> list[tuple[int, float]]:
    """(index, true range) of every target in range and line of sight of ``q``."""
    q = np.asarray(q, dtype=float)
    diff = targets - np.array([q[0], q[1], 0.0])
    ranges = np.linalg.norm(diff, axis=1)
    cand = np.flatnonzero(ranges <= min(sensor.max_range, workspace.sense_range))
    if cand.size == 0:
        return []
    blocked = segments_blocked(
        np.repeat(q[None, :2], cand.size, axis=0), targets[cand, :2], workspace.obstacles
    )
    return [(int(a), float(ranges[a])) for a, b in zip(cand, blocked) if not b]


def sense(s: WorldState, robot: int, rng: np.random.Generator, workspace: Workspace,
          sensor: SensorModel = DEFAULT_SENSOR, position=None) -> list[MeasurementRecord]:
    """Noisy range readings of every visible target from ``robot``'s position."""
    q = np.asarray(s.robots[robot] if position is None else position, dtype=float)
    out = []
    for a, ell in visible_targets(q, s.targets, workspace, sensor):
        y = ell + sensor.sigma(ell) * rng.standard_normal()
        out.append(MeasurementRecord(robot, s.t, a, float(y), (float(q[0]), float(q[1]))))
    return out


def robots_free(positions: Mapping[int, np.ndarray], workspace: Workspace) -> bool:
    return all(workspace.is_free(p) for p in positions.values())
