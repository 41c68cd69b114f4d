"""Exception hierarchy shared across the package."""


class SlipNavError(Exception):
    """Base class for all package errors."""


class DataError(SlipNavError):
    """Malformed, missing or physically implausible input data."""


class StreamGapError(DataError):
    """Two consecutive samples are further apart than the allowed maximum step."""


class ScenarioError(SlipNavError):
    """Invalid simulation scenario description."""


class NumericalHealthError(SlipNavError):
    """Covariance or attitude lost its required numerical properties."""


class SingularUpdateError(NumericalHealthError):
    """Innovation covariance could not be inverted."""


class PolarRegionError(SlipNavError):
    """Latitude too close to a pole for the curvilinear equations."""


class GimbalLockError(SlipNavError):
    """Pitch at +/-90 deg; roll and yaw cannot be separated."""
