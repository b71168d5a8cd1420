"""Full-body avatar motion generation from sparse head-mounted-device signals."""

from .errors import (
    ConfigError,
    ContainerError,
    DegenerateInput,
    EmptyDataset,
    EmptyInput,
    HmdMotionError,
    InvalidShapeParam,
    LineSearchFailure,
    NonFiniteEnergy,
    NonFiniteLoss,
    ShapeMismatch,
    UninitializedSession,
)
from .kinematics import (
    BodyPose,
    PoseSE3,
    RigidTransform,
    SkeletonSpec,
    default_skeleton,
    forward_kinematics,
)

__version__ = "0.1.0"
