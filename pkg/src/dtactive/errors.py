"""Shared exception types."""


class UngraspableError(ValueError):
    """No object radius up to the search bound makes contact with the fingertips."""


class ObjectLostError(RuntimeError):
    """The object left the grasp (ejected from the gap or tactile signal lost)."""


class EstimatorError(RuntimeError):
    """Non-finite or otherwise unusable estimator output; abort the rollout."""


class ControlError(RuntimeError):
    """Non-finite controller output; abort with diagnostic."""


class ConfigError(ValueError):
    """Config parse or validation failure. Message names the offending key."""
