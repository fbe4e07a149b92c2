import numpy as np
import pytest

from tgraph.geometry import CameraPose


def random_rotation(rng):
    """Uniform random rotation via QR with sign fix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1
    return q


def random_pose(rng, t_scale=2.0):
    return CameraPose(rotation=random_rotation(rng),
                      translation=t_scale * rng.normal(size=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
