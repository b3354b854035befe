"""Integrated simulation of intermittently communicating teams.

Events are processed epoch by epoch. Every robot attends the meetings of its
two teams in schedule order, so per robot the physical meeting times grow with
the epoch index and the epoch-ordered replay is causally consistent even
though different teams meet at unrelated physical times.

At a meeting the members pool their measurement records, the team re-runs
its filter from the last checkpoint before the oldest new record, and the
team plans the paths that bring its members together again one period later.
Each member's plan starts where and when its preceding meeting (with its
other team) ends.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import schedule as sched_mod
from . import team_graph as tg
from .errors import DSEError, NoGoalFound, NoPath, SimulationAborted, SingularInnovation
from .estimator import (
    Belief,
    CostContext,
    MeasurementRecord,
    NodeBelief,
    PredictedTrack,
    SensorModel,
    StackedModel,
    diag_blocks,
    initial_belief,
    update,
)
from .planner import disk_connected, fiedler_value, make_root, plan
from .scenario import Scenario
from .world import Workspace, follow, sense, simulate_targets, WorldState

# seed tags keep the random streams of different purposes independent
TAG_TARGETS, TAG_MEAS, TAG_PLAN, TAG_HEUR = 11, 23, 37, 41


def rng_for(seed: int, tag: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), tag, *(int(k) for k in keys)])


# -- per-robot state ----------------------------------------------------------


@dataclass
class Meeting:
    team: int
    epoch: int
    t: int
    position: np.ndarray


@dataclass
class RobotLog:
    robot: int
    start: np.ndarray
    owned: dict = field(default_factory=dict)
    meetings: dict = field(default_factory=dict)
    collected_to: int = 0

    def __post_init__(self):
        self._traj = [np.asarray(self.start, dtype=float)]

    @property
    def last_time(self) -> int:
        return len(self._traj) - 1

    def position(self, t: int) -> np.ndarray:
        return self._traj[min(t, self.last_time)]

    def extend_path(self, times: np.ndarray, positions: np.ndarray) -> None:
        """Append a timed path that starts at the current end of the trajectory."""
        times = np.asarray(times)
        if int(times[0]) != self.last_time:
            raise ValueError(
                f"robot {self.robot}: path starts at t={times[0]}, trajectory ends at {self.last_time}"
            )
        if np.any(np.diff(times) != 1):
            raise ValueError("paths need one waypoint per time step")
        self._traj.extend(np.asarray(p, dtype=float) for p in positions[1:])

    def hold_until(self, t: int) -> None:
        while self.last_time < t:
            self._traj.append(self._traj[-1])

    def trajectory(self, t_end: int) -> np.ndarray:
        return np.array([self.position(t) for t in range(t_end + 1)])

    def latest_meeting_before(self, epoch: int) -> Meeting | None:
        keys = [e for e in self.meetings if e < epoch]
        return self.meetings[max(keys)] if keys else None


def collect(robot: RobotLog, up_to: int, truth: np.ndarray, workspace: Workspace,
            sensor: SensorModel, seed: int, dt: int = 1) -> list[MeasurementRecord]:
    """Take the robot's own measurements at every multiple of ``dt`` up to ``up_to``."""
    new = []
    up_to = min(up_to, len(truth) - 1)
    t = (robot.collected_to // dt + 1) * dt
    while t <= up_to:
        if t > robot.last_time:
            raise ValueError(f"robot {robot.robot} has no planned position at t={t}")
        s = WorldState(t, truth[t], {robot.robot: robot.position(t)})
        recs = sense(s, robot.robot, rng_for(seed, TAG_MEAS, robot.robot, t), workspace, sensor)
        for rec in recs:
            robot.owned[rec.key] = rec
        new.extend(recs)
        t += dt
    robot.collected_to = max(robot.collected_to, up_to)
    return new


def exchange(members: Sequence[RobotLog]) -> dict:
    """Union of the members' records, deduplicated by key; every member gets it."""
    merged: dict = {}
    for m in members:
        merged.update(m.owned)
    for m in members:
        m.owned = dict(merged)
    return merged


def refilter(records: Iterable[MeasurementRecord], prior: Belief, models, to_time: int,
             sensor: SensorModel, trace: list | None = None) -> Belief:
    """Chronological EKF over ``records`` newer than ``prior``, up to ``to_time``.

    Records sharing a timestamp are fused as one stacked batch; a batch with a
    singular innovation is skipped.
    """
    sm = models if isinstance(models, StackedModel) else StackedModel(models)
    by_t: dict[int, list] = {}
    for rec in records:
        if prior.t < rec.t <= to_time:
            by_t.setdefault(rec.t, []).append(rec)
    b = prior
    while b.t < to_time:
        b = sm.step(b)
        batch = by_t.get(b.t)
        if batch:
            try:
                b = update(b, batch, sensor)
            except SingularInnovation:
                pass
        if trace is not None:
            trace.append(b)
    return b


def global_oracle(records: Iterable[MeasurementRecord], models, prior: Belief, t: int,
                  sensor: SensorModel, trace: list | None = None) -> Belief:
    """Estimate from fusing every robot's measurements as soon as they are taken."""
    return refilter(records, prior, models, t, sensor, trace)


# -- team state and logs --------------------------------------------------------


@dataclass
class TeamEvent:
    team: int
    epoch: int
    t: int
    members: tuple
    positions: np.ndarray
    clocks: tuple
    fiedler: float
    connected: bool
    n_fused: int
    prefix: dict
    fused_keys: frozenset | None = None
    xhat_trace: np.ndarray | None = None
    t_star: int | None = None
    e_d: float | None = None


@dataclass
class PlanInfo:
    team: int
    epoch: int
    planned_at: int
    t_f: int
    relaxation: str = "none"
    constraint_target: int | None = None
    waits: dict = field(default_factory=dict)
    meeting_point: tuple | None = None


class _TeamFilter:
    def __init__(self, prior: Belief):
        self.trace = [prior]
        self.fused: dict = {}

    @property
    def belief(self) -> Belief:
        return self.trace[-1]

    def absorb(self, merged: dict, t: int, models, sensor) -> Belief:
        new = [k for k in merged if k not in self.fused]
        last = self.trace[-1].t
        start = last
        if new:
            start = min(last, min(k[1] for k in new) - 1)
        del self.trace[start + 1:]
        refilter(merged.values(), self.trace[start], models, t, sensor, self.trace)
        self.fused = dict(merged)
        return self.trace[-1]


@dataclass
class SimulationLog:
    scenario: str
    strategy: str
    seed: int
    t_end: int
    truth: np.ndarray
    oracle_x: np.ndarray
    oracle_lam: np.ndarray
    e_loc: np.ndarray
    trajectories: dict
    records: list
    events: list
    plans: list
    period: int
    delay_bound: int
    labels: dict = field(default_factory=dict)
    complete_epoch: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def lambda_max(self) -> np.ndarray:
        return self.oracle_lam

    def summary(self) -> dict:
        return metrics(self)


# -- the simulation -------------------------------------------------------------

Planner = Callable[["_Sim", int, int, list], tuple[list, PlanInfo]]


class _Sim:
    def __init__(self, sc: Scenario, seed: int, strategy: str, keep_fused_sets: bool = False,
                 keep_traces: bool = True):
        self.sc = sc
        self.seed = int(seed)
        self.strategy = strategy
        self.keep_fused_sets = keep_fused_sets
        self.keep_traces = keep_traces
        self.ws = sc.workspace
        self.models = sc.models
        self.sm = StackedModel(self.models)
        self.graph = tg.build(sc.teams)
        if sc.schedule is not None:
            self.schedule = sched_mod.from_slots(self.graph, sc.schedule)
            if not sched_mod.validate(self.schedule, self.graph):
                raise DSEError("configured schedule is not conflict-free")
        else:
            self.schedule = sched_mod.synthesize(self.graph)
        T = self.schedule.period
        self.T = T
        self.D = tg.delay_bound(self.graph, T) if self.graph.M > 1 else 0
        self.truth = simulate_targets(
            sc.x0, self.models, self.ws, sc.t_end, rng_for(self.seed, TAG_TARGETS)
        )
        self.prior = initial_belief(sc.xhat0, sc.C0)
        self.robots = {r: RobotLog(r, np.asarray(sc.robots[r], dtype=float)) for r in self.graph.robots}
        self.teams = [sorted(team) for team in self.graph.teams]
        self.filters = [_TeamFilter(self.prior) for _ in self.teams]
        self.events: list[TeamEvent] = []
        self.plans: list[PlanInfo] = []

    # initial rendezvous

    def initial_meetings(self) -> None:
        R = self.ws.comm_range
        for e in range(1, self.T + 1):
            for i in sched_mod.teams_at(self.schedule, e):
                members = self.teams[i]
                starts = np.array([self.sc.robots[r] for r in members], dtype=float)
                c = starts.mean(axis=0)
                order = sorted(members, key=lambda r: (self.sc.robots[r][0], r))
                n = len(order)
                pts = {r: c + np.array([(k - (n - 1) / 2) * R / 2, 0.0]) for k, r in enumerate(order)}
                for r, p in pts.items():
                    if not self.ws.is_free(p):
                        raise SimulationAborted(
                            f"initial meeting point {p.tolist()} of team {i} is not free",
                            {"team": i, "epoch": e},
                        )
                legs = {}
                for r in members:
                    rob = self.robots[r]
                    path = self.ws.geodesic(rob.position(rob.last_time), pts[r])
                    legs[r] = follow(path, rob.last_time, self.sc.planner.u_max)
                t_f = max(int(times[-1]) for times, _ in legs.values())
                info = PlanInfo(i, e, 0, t_f, relaxation="initial")
                for r in members:
                    times, pos = legs[r]
                    times, pos = _pad(times, pos, t_f)
                    info.waits[r] = int(t_f - legs[r][0][-1])
                    self.robots[r].extend_path(times, pos)
                    self.robots[r].meetings[e] = Meeting(i, e, t_f, pos[-1].copy())
                self.plans.append(info)

    # one communication event

    def meet(self, i: int, k: int, planner: Planner) -> None:
        members = self.teams[i]
        t_f = self.robots[members[0]].meetings[k].t
        sc = self.sc
        for r in members:
            collect(self.robots[r], t_f, self.truth, self.ws, sc.sensor, self.seed, sc.dt)
        merged = exchange([self.robots[r] for r in members])
        b = self.filters[i].absorb(merged, t_f, self.sm, sc.sensor)
        pos = np.array([self.robots[r].meetings[k].position for r in members])
        clocks = tuple(int(self.robots[r].meetings[k].t) for r in members)
        lam2 = fiedler_value(pos, self.ws.comm_range)
        prefix = {}
        for key in merged:
            r, t = key[0], key[1]
            cnt, mx = prefix.get(r, (0, -1))
            prefix[r] = (cnt + 1, max(mx, t))
        ev = TeamEvent(
            team=i, epoch=k, t=t_f, members=tuple(members), positions=pos, clocks=clocks,
            fiedler=lam2, connected=disk_connected(pos, self.ws.comm_range),
            n_fused=len(merged), prefix=prefix,
            fused_keys=frozenset(merged) if self.keep_fused_sets else None,
            xhat_trace=np.array([s.xhat for s in self.filters[i].trace[: t_f + 1]]),
        )
        self.events.append(ev)

        nxt = k + self.T
        roots = []
        for r in members:
            m = self.robots[r].latest_meeting_before(nxt)
            roots.append((r, m))
        if max(m.t for _, m in roots) >= sc.t_end:
            return
        for r, m in roots:
            if self.robots[r].last_time != m.t:
                raise SimulationAborted(
                    f"robot {r} trajectory ends at {self.robots[r].last_time}, expected {m.t}",
                    {"team": i, "epoch": k},
                )
        try:
            legs, info = planner(self, i, k, roots, b)
        except DSEError as exc:
            raise SimulationAborted(
                f"planning failed for team {i} at epoch {k}: {exc}",
                {
                    "team": i, "epoch": k, "t": t_f, "error": type(exc).__name__,
                    "roots": {r: (m.position.tolist(), m.t) for r, m in roots},
                },
            ) from exc
        for (r, m), (times, pos) in zip(roots, legs):
            self.robots[r].extend_path(times, pos)
            self.robots[r].meetings[nxt] = Meeting(i, nxt, int(times[-1]), pos[-1].copy())
        self.plans.append(info)

    def run(self, planner: Planner) -> SimulationLog:
        self.initial_meetings()
        done = [False] * self.graph.M
        last_epoch = [0] * self.graph.M
        k = 0
        while not all(done):
            k += 1
            for i in sched_mod.teams_at(self.schedule, k):
                if done[i]:
                    continue
                m = self.robots[self.teams[i][0]].meetings.get(k)
                if m is None or m.t > self.sc.t_end:
                    done[i] = True
                    continue
                self.meet(i, k, planner)
                last_epoch[i] = k
        return self.finish(min(e + self.T - 1 for e in last_epoch))

    def finish(self, complete_epoch: int) -> SimulationLog:
        sc = self.sc
        records = []
        for rob in self.robots.values():
            rob.hold_until(sc.t_end)
            collect(rob, sc.t_end, self.truth, self.ws, sc.sensor, self.seed, sc.dt)
            records.extend(r for r in rob.owned.values() if r.robot == rob.robot)
        records.sort()
        trace = [self.prior]
        global_oracle(records, self.sm, self.prior, sc.t_end, sc.sensor, trace)
        ox = np.array([b.xhat for b in trace])
        olam = np.array([float(np.linalg.eigvalsh(b.C)[-1]) for b in trace])
        truth_flat = self.truth.reshape(len(self.truth), -1)
        e_loc = np.linalg.norm(ox - truth_flat, axis=1)
        for ev in self.events:
            ev.t_star, ev.e_d = delay_metric(ev.xhat_trace, ox, ev.t)
            if not self.keep_traces:
                ev.xhat_trace = None
        return SimulationLog(
            scenario=sc.name, strategy=self.strategy, seed=self.seed, t_end=sc.t_end,
            truth=self.truth, oracle_x=ox, oracle_lam=olam, e_loc=e_loc,
            trajectories={r: rob.trajectory(sc.t_end) for r, rob in self.robots.items()},
            records=records, events=self.events, plans=self.plans,
            period=self.T, delay_bound=self.D,
            labels=epoch_labels(self.robots, records, self.T),
            complete_epoch=complete_epoch,
        )


def _pad(times: np.ndarray, pos: np.ndarray, t_f: int):
    """Wait at the last waypoint until ``t_f``."""
    extra = t_f - int(times[-1])
    if extra <= 0:
        return times, pos
    return (np.concatenate([times, np.arange(times[-1] + 1, t_f + 1)]),
            np.vstack([pos, np.repeat(pos[-1:], extra, axis=0)]))


# -- planners for the intermittent strategy and the heuristic -------------------


def root_belief(sim: _Sim, b: Belief, roots, hold: dict | None = None):
    """Team belief at its meeting, with the members' already planned
    measurements up to their plan start times attached as pending.

    ``hold`` maps a robot to a later start time; the robot waits at its root
    position until then and its measurements there are pending as well.
    """
    sc = sim.sc
    hold = hold or {}
    track = PredictedTrack(b, sim.models)
    ctx = CostContext(sim.models, track, sc.sensor, sim.ws.obstacles, sc.dt)
    ts, qs = [], []
    for r, m in roots:
        rob = sim.robots[r]
        first = (b.t // sc.dt + 1) * sc.dt
        for t in range(first, hold.get(r, m.t) + 1, sc.dt):
            ts.append(t)
            qs.append(rob.position(t))
    nb = NodeBelief(
        b.t, diag_blocks(b.C),
        np.array(ts, dtype=np.int64), np.array(qs, dtype=float).reshape(-1, 2),
    )
    return nb, track, ctx


# start-time spreads tried in turn when no goal is found; the steering rule
# resolves a spread of g steps only through at least g * u_max / eps edges
LAG_CAPS = (None, 50, 0)


def intermittent_planner(sim: _Sim, i: int, k: int, roots, b: Belief):
    positions = np.array([m.position for _, m in roots])
    t_root = np.array([m.t for _, m in roots], dtype=np.int64)
    last_exc = None
    for attempt, cap in enumerate(LAG_CAPS):
        arrival = t_root.copy()
        if cap is not None:
            if t_root.max() - t_root.min() <= cap:
                continue
            arrival = np.maximum(t_root, t_root.max() - cap)
        hold = {r: int(a) for (r, _), a in zip(roots, arrival)}
        nb, _, ctx = root_belief(sim, b, roots, hold)
        root = make_root(positions, arrival, nb, ctx)
        try:
            res = plan(root, ctx, sim.ws, sim.sc.planner,
                       rng_for(sim.seed, TAG_PLAN, i, k, attempt))
        except NoGoalFound as exc:
            last_exc = exc
            continue
        info = PlanInfo(i, k + sim.T, b.t, res.t_f, res.relaxation, res.constraint_target)
        legs = []
        for (r, m), a, (times, pos) in zip(roots, arrival, res.waypoints):
            info.waits[r] = int(a - m.t)
            if a > m.t:
                times = np.concatenate([np.arange(m.t, a), times])
                pos = np.vstack([np.repeat(pos[:1], a - m.t, axis=0), pos])
            legs.append((times, pos))
        return legs, info
    raise last_exc


def meeting_configuration(q, n: int, spacing: float) -> np.ndarray:
    """``n`` points on a horizontal segment centred at ``q``."""
    q = np.asarray(q, dtype=float)
    return np.array([q + np.array([(j - (n - 1) / 2) * spacing, 0.0]) for j in range(n)])


def heuristic_legs(sim: _Sim, roots, q) -> list:
    ws = sim.ws
    pts = meeting_configuration(q, len(roots), sim.sc.meeting_spacing * ws.comm_range)
    if not all(ws.is_free(p) for p in pts):
        raise NoPath("meeting configuration is not in free space")
    order = sorted(range(len(roots)), key=lambda j: (roots[j][1].position[0], roots[j][0]))
    assign = {j: pts[rank] for rank, j in enumerate(order)}
    legs = []
    for j, (r, m) in enumerate(roots):
        path = ws.geodesic(m.position, assign[j])
        legs.append(follow(path, m.t, sim.sc.planner.u_max))
    return legs


def heuristic_planner(sim: _Sim, i: int, k: int, roots, b: Belief):
    rng = rng_for(sim.seed, TAG_HEUR, i, k)
    last_exc = None
    for _ in range(sim.sc.max_resample):
        q = sim.ws.sample_free(rng)
        try:
            legs = heuristic_legs(sim, roots, q)
        except NoPath as exc:
            last_exc = exc
            continue
        t_f = max(int(times[-1]) for times, _ in legs)
        info = PlanInfo(i, k + sim.T, b.t, t_f, relaxation="random", meeting_point=tuple(q.tolist()))
        out = []
        for (r, _), (times, pos) in zip(roots, legs):
            info.waits[r] = int(t_f - times[-1])
            out.append(_pad(times, pos, t_f))
        return out, info
    raise NoPath(f"no reachable meeting point after {sim.sc.max_resample} draws: {last_exc}")


PLANNERS = {"intermittent": intermittent_planner, "heuristic": heuristic_planner}


def run(scenario: Scenario, seed: int | None = None, strategy: str | None = None,
        keep_fused_sets: bool = False, keep_traces: bool = True) -> SimulationLog:
    """Simulate the scenario with a team-based strategy.

    Raises:
        SimulationAborted: a team could not plan its next meeting; the
            exception's ``diagnostic`` names the team, epoch and roots.
    """
    seed = scenario.seed if seed is None else seed
    strategy = strategy or scenario.strategy
    if strategy not in PLANNERS:
        raise ValueError(f"strategy {strategy!r} is not team based")
    sim = _Sim(scenario, seed, strategy, keep_fused_sets, keep_traces)
    return sim.run(PLANNERS[strategy])


# -- metrics --------------------------------------------------------------------


def delay_metric(team_x: np.ndarray, oracle_x: np.ndarray, t: int, tol: float = 1e-9):
    """First divergence time ``t*`` of a team trace from the oracle and the mean
    deviation from ``t*`` to ``t``."""
    diff = np.abs(team_x[: t + 1] - oracle_x[: t + 1]).max(axis=1)
    bad = np.flatnonzero(diff > tol)
    if bad.size == 0:
        return t, 0.0
    t_star = int(bad[0])
    if t_star == t:
        return t, 0.0
    dev = np.linalg.norm(team_x[t_star:t + 1] - oracle_x[t_star:t + 1], axis=1).sum()
    return t_star, float(dev / (t - t_star))


def epoch_labels(robots: dict, records: Sequence[MeasurementRecord], T: int) -> dict:
    """Epoch of each record: one past the taker's latest meeting strictly before it."""
    out = {}
    for r, rob in robots.items():
        ms = sorted(rob.meetings.values(), key=lambda m: m.epoch)
        times = np.array([m.t for m in ms])
        epochs = [m.epoch for m in ms]
        first = epochs[0] if epochs else 1
        for rec in records:
            if rec.robot != r:
                continue
            j = int(np.searchsorted(times, rec.t, side="left")) - 1
            prev = epochs[j] if j >= 0 else first - T
            out[rec.key] = prev + 1
    return out


def check_propagation(log: SimulationLog, D: int | None = None) -> list[tuple]:
    """Violations of "every team has fused all records from epochs <= k - D".

    Uses the per-robot prefix summaries of each event; a team's holdings of a
    robot's records are always a time prefix of that robot's records, which is
    verified here as well.
    """
    D = log.delay_bound if D is None else D
    by_robot: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for r in sorted({rec.robot for rec in log.records}):
        recs = [rec for rec in log.records if rec.robot == r]
        ts = np.array([rec.t for rec in recs])
        labs = np.array([log.labels[rec.key] for rec in recs])
        by_robot[r] = (ts, labs)
    events_by_team: dict[int, list[TeamEvent]] = {}
    for ev in log.events:
        events_by_team.setdefault(ev.team, []).append(ev)
    violations = []
    for ev in log.events:
        for r, (cnt, mx) in ev.prefix.items():
            ts, _ = by_robot[r]
            if cnt != int(np.sum(ts <= mx)):
                violations.append(("not_prefix", ev.team, ev.epoch, r))
    for team, evs in events_by_team.items():
        evs = sorted(evs, key=lambda e: e.epoch)
        for k in range(1, log.complete_epoch + 1):
            cur = [e for e in evs if e.epoch <= k]
            latest = cur[-1] if cur else None
            for r, (ts, labs) in by_robot.items():
                need = ts[labs <= k - D]
                if need.size == 0:
                    continue
                held = latest.prefix.get(r, (0, -1))[1] if latest else -1
                if need.max() > held:
                    violations.append(("missing", team, k, r, int(need.max()), held))
    return violations


def metrics(log: SimulationLog) -> dict:
    t_end = log.t_end
    out = {
        "scenario": log.scenario,
        "strategy": log.strategy,
        "seed": log.seed,
        "t_end": t_end,
        "e_loc_mean": float(log.e_loc.sum() / t_end),
        "lambda_mean": float(log.oracle_lam.sum() / t_end),
        "n_events": len(log.events),
        "n_records": len(log.records),
        "period": log.period,
        "delay_bound": log.delay_bound,
    }
    relax: dict[str, int] = {}
    for p in log.plans:
        relax[p.relaxation] = relax.get(p.relaxation, 0) + 1
    out["plans"] = dict(sorted(relax.items()))
    out["total_wait_steps"] = int(sum(sum(p.waits.values()) for p in log.plans))
    if log.events:
        out["min_fiedler"] = float(min(ev.fiedler for ev in log.events))
    out.update(log.extra)
    return out


def write_outputs(log: SimulationLog, out_dir) -> dict:
    """Write ``traces.csv``, ``team_<i>.csv`` and ``summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "traces.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "e_loc", "lambda_max"])
        for t in range(log.t_end + 1):
            w.writerow([t, f"{log.e_loc[t]:.9f}", f"{log.oracle_lam[t]:.9f}"])
    teams = sorted({ev.team for ev in log.events})
    for i in teams:
        with open(out / f"team_{i}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "t_star", "e_d"])
            for ev in sorted((e for e in log.events if e.team == i), key=lambda e: e.epoch):
                w.writerow([ev.t, ev.t_star, f"{ev.e_d:.9f}"])
    summary = metrics(log)
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def fmt_mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=0)) if arr.size else math.nan
