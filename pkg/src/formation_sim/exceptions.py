"""Exception hierarchy shared by all modules."""


class FormationError(Exception):
    """Base class for every error raised by formation_sim."""


class TopologyError(FormationError, ValueError):
    pass


class NotSymmetric(TopologyError):
    pass


class NonBinaryEntry(TopologyError):
    pass


class SelfLoop(TopologyError):
    pass


class Disconnected(TopologyError):
    pass


class IndexOutOfRange(FormationError, IndexError):
    pass


class NonPositiveRadius(FormationError, ValueError):
    pass


class CoincidentWithObstacle(FormationError):
    """An agent reached the singular core of a repulsive field (a collision)."""


class LeaderPassedToFollowerLaw(FormationError, ValueError):
    pass


class DegenerateEdge(FormationError, ValueError):
    pass


class NonFiniteState(FormationError):
    pass


class WrongControlMode(FormationError, ValueError):
    pass


class UnknownScenario(FormationError, KeyError):
    pass


class ParseError(FormationError, ValueError):
    pass


class ValidationError(FormationError, ValueError):
    pass
