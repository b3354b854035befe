"""Exception types raised across the package."""

from __future__ import annotations


class DSEError(Exception):
    """Base class for all package errors."""


class RobotNotInTwoTeams(DSEError):
    def __init__(self, robot, count: int):
        self.robot = robot
        self.count = count
        super().__init__(f"robot {robot!r} belongs to {count} distinct team(s), expected 2")


class DisconnectedTeamGraph(DSEError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        super().__init__(f"graph of teams is disconnected; components: {self.components}")


class UnknownRobot(DSEError, KeyError):
    pass


class UnknownTeam(DSEError, KeyError):
    pass


class OutOfSensingRange(DSEError, ValueError):
    pass


class SingularInnovation(DSEError):
    pass


class NoPath(DSEError):
    pass


class NoGoalFound(DSEError):
    pass


class SimulationAborted(DSEError):
    """A run stopped early; ``diagnostic`` holds what was known at the time."""

    def __init__(self, message: str, diagnostic: dict | None = None):
        self.diagnostic = diagnostic or {}
        super().__init__(message)


class ScenarioError(DSEError, ValueError):
    pass
