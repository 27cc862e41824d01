import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "desk",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("desk")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def orthogonal_sphere_cameras(distance=4.0, width=128, height=128, focal=128.0):
    """Three axis-aligned cameras looking at the origin."""
    from hullpaint import look_at

    cams = []
    for eye in ((distance, 0.0, 0.0), (0.0, distance, 0.0), (0.0, 0.0, distance)):
        up = (0.0, 0.0, 1.0) if eye[2] == 0.0 else (0.0, 1.0, 0.0)
        cams.append(look_at(eye, (0.0, 0.0, 0.0), up, width=width, height=height, focal=focal))
    return cams


@pytest.fixture
def sphere_hull_fixture():
    """Hull of a radius-1 sphere seen from 3 orthogonal cameras at distance 4."""
    from hullpaint import hull_from_masks
    from hullpaint.sceneio import sphere_silhouette

    cams = orthogonal_sphere_cameras()
    masks = [sphere_silhouette(c, (0.0, 0.0, 0.0), 1.0) for c in cams]
    return hull_from_masks(masks), masks, cams
