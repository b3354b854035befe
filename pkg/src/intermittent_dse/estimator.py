"""Range-only EKF over stacked 3D target states.

The full-matrix functions (:func:`predict`, :func:`update`) are the reference
filter used at run time. Planning evaluates thousands of candidate edges, so
:func:`path_cost` works on the per-target 3x3 covariance blocks instead; the
targets are independent and every measurement touches a single target, so a
block-diagonal covariance stays block-diagonal under both stages.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import OutOfSensingRange, SingularInnovation
from .geometry import as_segments

MIN_RANGE = 1e-6


# --------------------------------------------------------------------------
# sensor and target models


@dataclass(frozen=True)
class SensorModel:
    max_range: float = 5.0
    near: float = 1.0
    far: float = 3.0
    sigma_near: float = 0.01
    slope: float = 0.045
    intercept: float = -0.035
    sigma_far: float = 0.1

    def sigma(self, ell: float) -> float:
        """Standard deviation of a range reading taken at true range ``ell``."""
        if ell < 0:
            raise ValueError(f"range must be nonnegative, got {ell}")
        if ell > self.max_range:
            raise OutOfSensingRange(f"range {ell} exceeds {self.max_range}")
        if ell <= self.near:
            return self.sigma_near
        if ell <= self.far:
            return self.affine(ell)
        return self.sigma_far

    def affine(self, ell: float) -> float:
        """Middle branch, evaluated in rational arithmetic and rounded once so
        that it meets the flat branches exactly at the breakpoints."""
        return float(_exact(self.slope) * Fraction(ell) + _exact(self.intercept))

    def noise_std(self, ell: float) -> float:
        # predicted ranges may overshoot the sensing limit slightly
        return self.sigma(min(max(ell, 0.0), self.max_range))


def _exact(v: float) -> Fraction:
    return Fraction(repr(float(v)))


DEFAULT_SENSOR = SensorModel()


def sigma(ell: float, sensor: SensorModel = DEFAULT_SENSOR) -> float:
    return sensor.sigma(ell)


class InputProfile:
    """Open-loop input ``u(t)``: the nominal displacement from ``t`` to ``t+1``."""

    def nominal(self, t: int) -> np.ndarray:
        raise NotImplementedError

    def u(self, t: int) -> np.ndarray:
        return self.nominal(t + 1) - self.nominal(t)


@dataclass(frozen=True)
class StaticProfile(InputProfile):
    position: tuple[float, float, float]

    def nominal(self, t: int) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    def u(self, t: int) -> np.ndarray:
        return np.zeros(3)


@dataclass(frozen=True)
class LinearProfile(InputProfile):
    """Closed polyline through ``waypoints`` traversed at constant ``speed``."""

    waypoints: tuple[tuple[float, float, float], ...]
    speed: float

    def nominal(self, t: int) -> np.ndarray:
        pts = np.asarray(self.waypoints, dtype=float)
        if len(pts) == 1 or self.speed == 0:
            return pts[0].copy()
        loop = np.vstack([pts, pts[:1]])
        seg = np.diff(loop, axis=0)
        lengths = np.linalg.norm(seg, axis=1)
        total = lengths.sum()
        s = (self.speed * t) % total
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        k = int(np.searchsorted(cum, s, side="right") - 1)
        k = min(k, len(lengths) - 1)
        frac = (s - cum[k]) / lengths[k] if lengths[k] > 0 else 0.0
        return loop[k] + frac * seg[k]


@dataclass(frozen=True)
class CircularProfile(InputProfile):
    center: tuple[float, float, float]
    radius: float
    period: float
    phase: float = 0.0

    def nominal(self, t: int) -> np.ndarray:
        ang = self.phase + 2.0 * math.pi * t / self.period
        c = np.asarray(self.center, dtype=float)
        return c + self.radius * np.array([math.cos(ang), math.sin(ang), 0.0])

    @classmethod
    def through(cls, start, radius: float, period: float, phase: float = 0.0) -> "CircularProfile":
        """Circle whose nominal position at ``t = 0`` is ``start``."""
        start = np.asarray(start, dtype=float)
        center = start - radius * np.array([math.cos(phase), math.sin(phase), 0.0])
        return cls(tuple(center.tolist()), radius, period, phase)


@dataclass(frozen=True)
class TargetModel:
    """``x(t+1) = A x(t) + B u(t) + w(t)`` with ``w ~ N(0, Q)``."""

    A: np.ndarray = field(default_factory=lambda: np.eye(3))
    B: np.ndarray = field(default_factory=lambda: np.eye(3))
    Q: np.ndarray = field(default_factory=lambda: 1e-4 * np.eye(3))
    profile: InputProfile = field(default_factory=lambda: StaticProfile((0.0, 0.0, 0.0)))

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if not np.allclose(Q, Q.T) or np.any(np.linalg.eigvalsh(Q) <= 0):
            raise ValueError("process noise covariance must be symmetric positive definite")

    def u(self, t: int) -> np.ndarray:
        return np.asarray(self.profile.u(t), dtype=float)

    def step_mean(self, x: np.ndarray, t: int) -> np.ndarray:
        return self.A @ x + self.B @ self.u(t)


def block_diag(blocks: np.ndarray) -> np.ndarray:
    blocks = np.asarray(blocks, dtype=float)
    n, d, _ = blocks.shape
    out = np.zeros((n * d, n * d))
    for a in range(n):
        out[a * d:(a + 1) * d, a * d:(a + 1) * d] = blocks[a]
    return out


def diag_blocks(C: np.ndarray, d: int = 3) -> np.ndarray:
    n = C.shape[0] // d
    return np.stack([C[a * d:(a + 1) * d, a * d:(a + 1) * d] for a in range(n)])


# --------------------------------------------------------------------------
# beliefs and measurements


@dataclass(frozen=True)
class Belief:
    t: int
    xhat: np.ndarray
    C: np.ndarray

    @property
    def n_targets(self) -> int:
        return self.xhat.shape[0] // 3

    def target_mean(self, a: int) -> np.ndarray:
        return self.xhat[3 * a:3 * a + 3]

    def target_cov(self, a: int) -> np.ndarray:
        return self.C[3 * a:3 * a + 3, 3 * a:3 * a + 3]

    def target_uncertainty(self) -> np.ndarray:
        """Largest eigenvalue of every target's covariance block."""
        return np.linalg.eigvalsh(diag_blocks(self.C))[:, -1]


def initial_belief(xhat0, variance: float = 0.25, t: int = 0) -> Belief:
    xhat = np.asarray(xhat0, dtype=float).reshape(-1)
    return Belief(t, xhat, variance * np.eye(xhat.size))


@dataclass(frozen=True, order=True)
class MeasurementRecord:
    robot: int
    t: int
    target: int
    y: float = field(compare=False)
    q: tuple[float, float] = field(compare=False)

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.robot, self.t, self.target)


class StackedModel:
    """Block-diagonal dynamics of all targets with cached inputs."""

    def __init__(self, models: Sequence[TargetModel]):
        self.models = list(models)
        self.F = block_diag(np.stack([np.asarray(m.A, dtype=float) for m in self.models]))
        self.Q = block_diag(np.stack([np.asarray(m.Q, dtype=float) for m in self.models]))
        self._bu: dict[int, np.ndarray] = {}

    def bu(self, t: int) -> np.ndarray:
        v = self._bu.get(t)
        if v is None:
            v = np.concatenate([m.B @ m.u(t) for m in self.models])
            self._bu[t] = v
        return v

    def step(self, b: Belief) -> Belief:
        x = self.F @ b.xhat + self.bu(b.t)
        C = self.F @ b.C @ self.F.T + self.Q
        return Belief(b.t + 1, x, C)


def predict(b: Belief, models, to_time: int) -> Belief:
    """Propagate through the dynamics; ``models`` is a list or a :class:`StackedModel`."""
    if to_time < b.t:
        raise ValueError(f"cannot predict backwards from {b.t} to {to_time}")
    sm = models if isinstance(models, StackedModel) else StackedModel(models)
    while b.t < to_time:
        b = sm.step(b)
    return b


def _range_row(xhat: np.ndarray, q, a: int, n: int) -> tuple[float, np.ndarray]:
    diff = xhat[3 * a:3 * a + 3] - np.array([q[0], q[1], 0.0])
    ell = float(np.linalg.norm(diff))
    row = np.zeros(n)
    if ell >= MIN_RANGE:
        row[3 * a:3 * a + 3] = diff / ell
    return ell, row


def update(
    b: Belief,
    batch: Sequence[MeasurementRecord],
    sensor: SensorModel = DEFAULT_SENSOR,
    predicted_only: bool = False,
) -> Belief:
    """Stacked EKF update with all records taken at ``b.t``.

    With ``predicted_only`` the innovation is zero and only the covariance
    changes, as when planning ahead of the actual measurements.
    """
    if not batch:
        return b
    n = b.xhat.size
    rows, resid, var = [], [], []
    for rec in sorted(batch):
        if rec.t != b.t:
            raise ValueError(f"record at t={rec.t} in a batch for t={b.t}")
        ell, row = _range_row(b.xhat, rec.q, rec.target, n)
        if ell < MIN_RANGE:
            continue
        rows.append(row)
        resid.append(0.0 if predicted_only else rec.y - ell)
        var.append(sensor.noise_std(ell) ** 2)
    if not rows:
        return b
    return kalman_update(b, np.array(rows), np.asarray(resid), np.diag(var))


def kalman_update(b: Belief, H: np.ndarray, innovation: np.ndarray, R: np.ndarray) -> Belief:
    """Kalman correction for linear(ized) measurements ``H`` with noise ``R``.

    Raises:
        SingularInnovation: the innovation covariance is not invertible.
    """
    n = b.xhat.size
    S = H @ b.C @ H.T + R
    try:
        if not np.all(np.isfinite(S)) or np.linalg.cond(S) > 1e14:
            raise np.linalg.LinAlgError
        K = np.linalg.solve(S, H @ b.C).T
    except np.linalg.LinAlgError:
        raise SingularInnovation(f"innovation covariance is singular at t={b.t}") from None
    xhat = b.xhat + K @ innovation
    C = (np.eye(n) - K @ H) @ b.C
    C = 0.5 * (C + C.T)
    return Belief(b.t, xhat, C)


def uncertainty(b: Belief) -> float:
    return float(np.linalg.eigvalsh(b.C)[-1])


def predicted_records(b_t: int, times, positions, xhat: np.ndarray, sensor: SensorModel,
                      obstacles, visible) -> list[MeasurementRecord]:
    """Placeholder records for planning: every target in range and sight."""
    out = []
    for t, q in zip(times, positions):
        if t != b_t:
            continue
        for a in range(xhat.size // 3):
            ell = float(np.linalg.norm(xhat[3 * a:3 * a + 3] - np.array([q[0], q[1], 0.0])))
            if ell <= sensor.max_range and visible(q, xhat[3 * a:3 * a + 3], obstacles):
                out.append(MeasurementRecord(-1, int(t), a, ell, (float(q[0]), float(q[1]))))
    return out


# --------------------------------------------------------------------------
# planning-time cost accumulation


class PredictedTrack:
    """Noise-free propagation of the estimate; planning never moves ``xhat``
    except through the dynamics, so one track serves the whole tree."""

    def __init__(self, belief: Belief, models: Sequence[TargetModel]):
        self.t0 = belief.t
        self.models = list(models)
        self._x = [belief.xhat.reshape(-1, 3).copy()]

    def _extend(self, t: int) -> None:
        while self.t0 + len(self._x) - 1 < t:
            s = self.t0 + len(self._x) - 1
            prev = self._x[-1]
            self._x.append(np.stack([m.step_mean(prev[a], s) for a, m in enumerate(self.models)]))

    def at(self, t: int) -> np.ndarray:
        self._extend(t)
        return self._x[t - self.t0]

    def window(self, t_lo: int, t_hi: int) -> np.ndarray:
        """Means for times ``t_lo+1 .. t_hi`` as ``(t_hi - t_lo, A, 3)``."""
        if t_hi <= t_lo:
            return np.zeros((0, len(self.models), 3))
        self._extend(t_hi)
        return np.ascontiguousarray(np.stack(self._x[t_lo + 1 - self.t0:t_hi + 1 - self.t0]))


@dataclass
class CostContext:
    models: Sequence[TargetModel]
    track: PredictedTrack
    sensor: SensorModel = DEFAULT_SENSOR
    obstacles: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    dt: int = 1
    offsets: np.ndarray | None = None

    def __post_init__(self):
        self.obstacles = np.ascontiguousarray(as_segments(self.obstacles))
        self.F = np.ascontiguousarray(np.stack([np.asarray(m.A, dtype=float) for m in self.models]))
        self.Q = np.ascontiguousarray(np.stack([np.asarray(m.Q, dtype=float) for m in self.models]))
        self.f_identity = bool(np.all(self.F == np.eye(3)))
        s = self.sensor
        self._sensor_params = np.array(
            [s.max_range, s.near, s.far, s.sigma_near, s.slope, s.intercept, s.sigma_far]
        )

    def sensor_offsets(self, n_agents: int) -> np.ndarray:
        if self.offsets is None:
            return np.zeros((n_agents, 1, 2))
        return np.asarray(self.offsets, dtype=float)


@dataclass
class NodeBelief:
    """Covariance blocks at ``t`` (the earliest arrival time of the node) and
    the predicted measurements already scheduled by agents that are ahead."""

    t: int
    P: np.ndarray
    pending_t: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    pending_q: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def belief(self, track: PredictedTrack) -> Belief:
        return Belief(self.t, track.at(self.t).reshape(-1).copy(), block_diag(self.P))

    def target_uncertainty(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.P)[:, -1]


def interpolate(p0, t0: int, p1, t1: int, times: np.ndarray) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if t1 == t0:
        return np.repeat(p0[None, :], len(times), axis=0)
    frac = (np.asarray(times, dtype=float) - t0) / (t1 - t0)
    return p0 + frac[:, None] * (p1 - p0)


def segment_measurements(start_pos, start_t, end_pos, end_t, offsets: np.ndarray, dt: int = 1):
    """Times and sensor positions of the measurements taken on a joint edge.

    Agent ``r`` moves in a straight line at constant speed from
    ``start_pos[r]`` at ``start_t[r]`` to ``end_pos[r]`` at ``end_t[r]`` and
    measures at every multiple of ``dt`` in ``(start_t[r], end_t[r]]``.
    """
    ts, qs = [], []
    for r in range(len(start_t)):
        t0, t1 = int(start_t[r]), int(end_t[r])
        first = (t0 // dt + 1) * dt
        times = np.arange(first, t1 + 1, dt, dtype=np.int64)
        if times.size == 0:
            continue
        pos = interpolate(start_pos[r], t0, end_pos[r], t1, times)
        for off in offsets[r]:
            ts.append(times)
            qs.append(pos + off)
    if not ts:
        return np.zeros(0, dtype=np.int64), np.zeros((0, 2))
    t_all = np.concatenate(ts)
    q_all = np.concatenate(qs)
    order = np.argsort(t_all, kind="stable")
    return t_all[order], q_all[order]


def path_cost(parent: NodeBelief, start_pos, start_t, end_pos, end_t, ctx: CostContext,
              reference: bool = False) -> tuple[float, NodeBelief]:
    """Cost increment and child belief for one joint edge.

    Sums the largest covariance eigenvalue over every time in
    ``(parent.t, min(end_t)]`` while fusing predicted-only measurements;
    measurements after ``min(end_t)`` are carried in the child's pending list.
    """
    end_t = np.asarray(end_t, dtype=np.int64)
    t_hi = int(end_t.min())
    t_lo = parent.t
    if t_hi < t_lo:
        raise ValueError("child cannot be earlier than its parent")
    offsets = ctx.sensor_offsets(len(end_t))
    seg_t, seg_q = segment_measurements(start_pos, start_t, end_pos, end_t, offsets, ctx.dt)
    all_t = np.concatenate([parent.pending_t, seg_t])
    all_q = np.concatenate([parent.pending_q, seg_q])
    order = np.argsort(all_t, kind="stable")
    all_t, all_q = all_t[order], all_q[order]
    now = all_t <= t_hi
    fuse_t = np.ascontiguousarray(all_t[now])
    fuse_q = np.ascontiguousarray(all_q[now])

    if reference:
        inc, P = _reference_cost(parent, fuse_t, fuse_q, t_hi, ctx)
    else:
        P = parent.P.copy()
        xs = ctx.track.window(t_lo, t_hi)
        inc = _kernels.cost_kernel(
            P, ctx.F, ctx.Q, ctx.f_identity, xs, fuse_t, fuse_q, ctx.obstacles, t_lo,
            ctx._sensor_params,
        )
    child = NodeBelief(t_hi, P, np.ascontiguousarray(all_t[~now]), np.ascontiguousarray(all_q[~now]))
    return float(inc), child


def _reference_cost(parent: NodeBelief, fuse_t, fuse_q, t_hi, ctx: CostContext):
    """Same accumulation through the full-matrix filter; used as a cross-check."""
    from .world import line_of_sight

    b = parent.belief(ctx.track)
    sm = StackedModel(ctx.models)
    inc = 0.0
    for t in range(parent.t + 1, t_hi + 1):
        b = predict(b, sm, t)
        mask = fuse_t == t
        recs = predicted_records(
            t, fuse_t[mask], fuse_q[mask], b.xhat, ctx.sensor, ctx.obstacles,
            lambda q, x, obs: line_of_sight(q, x, obs),
        )
        b = update(b, recs, ctx.sensor, predicted_only=True)
        inc += uncertainty(b)
    return inc, diag_blocks(b.C)
