"""Exception and warning types shared across the package."""


class HmdMotionError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(HmdMotionError):
    """Array shapes do not agree with the skeleton / each other."""


class DegenerateInput(HmdMotionError):
    """Input too close to a singular configuration to process."""


class UninitializedSession(HmdMotionError):
    """A streaming step was attempted before the session was initialized."""


class EmptyInput(HmdMotionError):
    """An operation that needs at least one element received none."""


class EmptyDataset(HmdMotionError):
    """No usable training windows could be extracted."""


class NonFiniteLoss(HmdMotionError):
    """Training produced a NaN/Inf loss; carries step diagnostics."""

    def __init__(self, step, components):
        self.step = step
        self.components = dict(components)
        parts = ", ".join(f"{k}={v}" for k, v in self.components.items())
        super().__init__(f"non-finite loss at step {step}: {parts}")


class InvalidShapeParam(HmdMotionError):
    """Robust-energy shape parameters outside their valid domain."""


class NonFiniteEnergy(HmdMotionError):
    """Refinement energy became NaN/Inf for a frame."""


class ContainerError(HmdMotionError):
    """A motion/stream container on disk is malformed."""


class ConfigError(HmdMotionError):
    """A run configuration file failed validation."""


class LineSearchFailure(RuntimeWarning):
    """The refinement line search could not decrease the energy."""
