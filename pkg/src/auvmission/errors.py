"""Exception hierarchy shared by every planning layer."""


class AuvMissionError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(AuvMissionError, ValueError):
    pass


class DegenerateClusterError(AuvMissionError, ValueError):
    """More clusters were requested than the raster has distinct colours."""


class MapTooConstrainedError(AuvMissionError):
    """Rejection sampling could not place a waypoint in open water."""


class InvalidSpeedError(AuvMissionError, ValueError):
    pass


class ConnectivityError(AuvMissionError):
    """Start and goal are not connected in the waypoint network."""


class PlacementError(AuvMissionError, ValueError):
    """Obstacle support box is too small for the requested radius."""


class InvalidCountError(AuvMissionError, ValueError):
    pass


class SplineOrderError(AuvMissionError, ValueError):
    pass


class DimensionMismatchError(AuvMissionError, ValueError):
    pass


class InvalidSequenceError(AuvMissionError, ValueError):
    """A waypoint sequence uses a pair of nodes that is not an edge."""


class InfeasibleMissionError(AuvMissionError):
    """No start-to-goal plan fits inside the available time."""


class ScenarioValidationError(AuvMissionError, ValueError):
    """Raised with every invalid scenario field collected in ``problems``."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))
