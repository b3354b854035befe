"""Comparison strategies: a rigid always-connected formation and random meetings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DSEError, SimulationAborted, SingularInnovation
from .estimator import (
    CostContext,
    NodeBelief,
    PredictedTrack,
    StackedModel,
    diag_blocks,
    initial_belief,
    update,
)
from .planner import fiedler_value, make_root, plan
from .runtime import (
    TAG_MEAS,
    TAG_PLAN,
    TAG_TARGETS,
    PlanInfo,
    SimulationLog,
    TeamEvent,
    delay_metric,
    global_oracle,
    rng_for,
    run,
)
from .scenario import Scenario
from .world import WorldState, sense, simulate_targets


@dataclass(frozen=True)
class FormationSpec:
    """Fixed offsets of the robots around the formation's centre."""

    robots: tuple
    offsets: np.ndarray

    @classmethod
    def chain(cls, robots, spacing: float) -> "FormationSpec":
        n = len(robots)
        off = np.array([[(j - (n - 1) / 2) * spacing, 0.0] for j in range(n)])
        return cls(tuple(robots), off)

    def fiedler(self, R: float) -> float:
        return fiedler_value(self.offsets, R)

    def positions(self, center) -> np.ndarray:
        return np.asarray(center, dtype=float) + self.offsets


def run_all_time(scenario: Scenario, seed: int | None = None,
                 formation: FormationSpec | None = None) -> SimulationLog:
    """Move the whole network as one rigid connected formation.

    The centre follows informative paths planned over the formation's
    combined sensing; on arrival it plans again. Every measurement is fused
    by every robot at once, so the network estimate is the global one.
    """
    sc = scenario
    seed = sc.seed if seed is None else int(seed)
    ws = sc.workspace
    robots = tuple(sorted(sc.robots))
    if formation is None:
        formation = FormationSpec.chain(robots, sc.formation_spacing * ws.comm_range)
    if formation.fiedler(ws.comm_range) <= 1e-9 and len(robots) > 1:
        raise DSEError("formation disk graph is not connected")
    models = sc.models
    sm = StackedModel(models)
    truth = simulate_targets(sc.x0, models, ws, sc.t_end, rng_for(seed, TAG_TARGETS))
    center = np.mean([sc.robots[r] for r in robots], axis=0)
    if not all(ws.is_free(p) for p in formation.positions(center)):
        raise DSEError(f"formation does not fit at its start centre {center.tolist()}")

    b = initial_belief_from(sc)
    trace_x = [b.xhat]
    trace = [b]
    records = []
    centers = [center]
    plans: list[PlanInfo] = []
    events: list[TeamEvent] = []
    offsets = formation.offsets[None, :, :]
    path_t = np.array([0])
    path_p = center[None, :]
    n_plans = 0
    for t in range(0, sc.t_end + 1):
        if t > 0:
            c = path_p[min(t - int(path_t[0]), len(path_p) - 1)]
            centers.append(c)
            b = sm.step(b)
            batch = []
            if t % sc.dt == 0:
                pos = formation.positions(c)
                for r, p in zip(robots, pos):
                    s = WorldState(t, truth[t], {r: p})
                    batch.extend(sense(s, r, rng_for(seed, TAG_MEAS, r, t), ws, sc.sensor))
            if batch:
                try:
                    b = update(b, batch, sc.sensor)
                except SingularInnovation:
                    pass
            records.extend(batch)
            trace.append(b)
            trace_x.append(b.xhat)
        if t == int(path_t[-1]) and t < sc.t_end:
            c = centers[-1]
            track = PredictedTrack(b, models)
            ctx = CostContext(models, track, sc.sensor, ws.obstacles, sc.dt, offsets)
            root = make_root(c[None, :], np.array([t]), NodeBelief(t, diag_blocks(b.C)), ctx)
            try:
                res = plan(root, ctx, ws, sc.planner, rng_for(seed, TAG_PLAN, 0, n_plans))
            except DSEError as exc:
                raise SimulationAborted(
                    f"all-time planning failed at t={t}: {exc}",
                    {"t": t, "center": c.tolist(), "error": type(exc).__name__},
                ) from exc
            n_plans += 1
            path_t, path_p = res.waypoints[0]
            plans.append(PlanInfo(0, n_plans, t, res.t_f, res.relaxation, res.constraint_target))
            events.append(TeamEvent(
                team=0, epoch=n_plans, t=t, members=robots, positions=formation.positions(c),
                clocks=(t,) * len(robots), fiedler=formation.fiedler(ws.comm_range),
                connected=True, n_fused=len(records), prefix={},
                xhat_trace=np.array(trace_x),
            ))

    records.sort()
    otrace = [initial_belief_from(sc)]
    global_oracle(records, sm, otrace[0], sc.t_end, sc.sensor, otrace)
    ox = np.array([bb.xhat for bb in otrace])
    olam = np.array([float(np.linalg.eigvalsh(bb.C)[-1]) for bb in otrace])
    e_loc = np.linalg.norm(ox - truth.reshape(len(truth), -1), axis=1)
    for ev in events:
        ev.t_star, ev.e_d = delay_metric(ev.xhat_trace, ox, ev.t)
    cs = np.array(centers)
    trajectories = {r: cs + off for r, off in zip(robots, formation.offsets)}
    return SimulationLog(
        scenario=sc.name, strategy="all-time", seed=seed, t_end=sc.t_end, truth=truth,
        oracle_x=ox, oracle_lam=olam, e_loc=e_loc, trajectories=trajectories,
        records=records, events=events, plans=plans, period=1, delay_bound=0,
        extra={"formation_fiedler": formation.fiedler(ws.comm_range)},
    )


def initial_belief_from(sc: Scenario):
    return initial_belief(sc.xhat0, sc.C0)


def run_heuristic(scenario: Scenario, seed: int | None = None) -> SimulationLog:
    """Team schedules as in the intermittent method, random meeting points."""
    return run(scenario, seed, "heuristic")


def run_strategy(scenario: Scenario, strategy: str, seed: int | None = None) -> SimulationLog:
    if strategy == "all-time":
        return run_all_time(scenario, seed)
    if strategy == "heuristic":
        return run_heuristic(scenario, seed)
    if strategy == "intermittent":
        return run(scenario, seed, "intermittent")
    raise ValueError(f"unknown strategy {strategy!r}")
