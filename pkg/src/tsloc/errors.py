"""Exception hierarchy shared by all tsloc modules."""


class LocalizationError(Exception):
    """Base class for every error raised by tsloc."""


class ScenarioError(LocalizationError, ValueError):
    """A scenario or scene description is malformed."""


# scene
class DuplicateNodeId(ScenarioError):
    pass


class MixedDimensionality(ScenarioError):
    pass


class EmptyScene(ScenarioError):
    pass


class UnknownNodeId(ScenarioError, KeyError):
    pass


# clocks / channel / simulate
class InvalidParams(ScenarioError):
    pass


class NegativeDistance(LocalizationError, ValueError):
    pass


class NoTransmitters(ScenarioError):
    pass


class MissingClock(ScenarioError):
    pass


class SigmaForBlindNode(ScenarioError):
    pass


# estimate
class MismatchedReceiver(LocalizationError, ValueError):
    pass


class MismatchedPacket(LocalizationError, ValueError):
    pass


class IncompleteQuad(LocalizationError, ValueError):
    pass


class InsufficientCommonPackets(LocalizationError):
    pass


class MissingDriftEstimate(LocalizationError):
    pass


class InsufficientAnchors(LocalizationError):
    pass


class DisconnectedTarget(LocalizationError):
    pass


class SingularGeometry(LocalizationError):
    pass


class NoConvergence(LocalizationError):
    pass


class TooFewEntriesToFilter(LocalizationError):
    pass


class UnlocatableNode(LocalizationError):
    pass


# harness
class AllTrialsFailed(LocalizationError):
    pass
