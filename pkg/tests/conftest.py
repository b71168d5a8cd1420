import numpy as np
import pytest
import torch

from hmdmotion.kinematics import default_skeleton


@pytest.fixture(scope="session")
def skel():
    return default_skeleton()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_rotation(rng, dtype=torch.float64):
    """Uniform-ish random rotation via scipy (independent of the package code)."""
    from scipy.spatial.transform import Rotation

    m = Rotation.random(random_state=int(rng.integers(0, 2**31 - 1))).as_matrix()
    return torch.as_tensor(m, dtype=dtype)


def random_transform(rng, dtype=torch.float64):
    from hmdmotion.kinematics import RigidTransform

    return RigidTransform(
        random_rotation(rng, dtype), torch.as_tensor(rng.normal(size=3), dtype=dtype)
    )
