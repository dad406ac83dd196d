"""Exception types shared across the package."""


class MuralError(Exception):
    """Base class for all muralkit errors."""


class DegenerateGeometry(MuralError):
    """Curve or chain has no usable extent."""


class NotAdjacent(MuralError):
    """Two chains were expected to share an endpoint but do not."""


class ParseError(MuralError):
    """Input document is malformed."""


class UnsupportedFeature(ParseError):
    """Input uses a feature outside the supported subset."""


class OpenContour(MuralError):
    """A closed contour was required."""


class EmptyPlan(MuralError):
    """Plan or selection contains no drawable paths."""


class InsufficientData(MuralError):
    """Not enough measurements to run an estimator."""


class NoWall(MuralError):
    """RANSAC could not find a dominant line in the scan."""


class NoPattern(MuralError):
    """No blob triple qualifies as the LED pattern."""


class DegenerateConfig(MuralError):
    """Calibration points are in a degenerate configuration."""


class StaleSensor(MuralError):
    """A sensor reading is older than the staleness bound."""


class NoIntersection(MuralError):
    """Back-projected ray does not meet the wall-distance plane."""


class InfeasibleProfile(MuralError):
    """Speed profile cannot reach target speed within the extension."""


class Tampered(MuralError):
    """Frame failed authentication."""


class Replayed(MuralError):
    """Frame sequence number is not newer than the last accepted one."""


class BadSelection(MuralError):
    """Path selection refers to unknown or duplicate indices."""


class PlanChanged(MuralError):
    """Checkpoint does not match the loaded plan."""


class BadGeometry(MuralError):
    """Geometry lies outside the wall rectangle."""


class IllegalTransition(MuralError):
    """Mission state machine was asked to make a forbidden phase change."""
