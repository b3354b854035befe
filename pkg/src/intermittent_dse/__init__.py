"""Distributed state estimation with intermittently connected robot teams."""

from .baselines import FormationSpec, run_all_time, run_heuristic, run_strategy
from .estimator import Belief, MeasurementRecord, SensorModel, TargetModel
from .planner import PlannerParams, plan
from .runtime import SimulationLog, metrics, run
from .scenario import Scenario, load
from .schedule import Schedule, synthesize
from .team_graph import TeamGraph, build
from .world import Workspace

__all__ = [
    "Belief", "FormationSpec", "MeasurementRecord", "PlannerParams", "Scenario", "Schedule",
    "SensorModel", "SimulationLog", "TargetModel", "TeamGraph", "Workspace", "build", "load",
    "metrics", "plan", "run", "run_all_time", "run_heuristic", "run_strategy", "synthesize",
]
