import numpy as np
import pytest

from handfit import default_camera, default_template
from handfit.skeleton import ARTICULATION_DIM, HandParams


@pytest.fixture(scope="session")
def template():
    return default_template()


@pytest.fixture(scope="session")
def cam():
    return default_camera()


def random_params(rng, template, margin=0.1, depth=(0.4, 0.7)):
    """Random pose with articulation strictly inside the limits.

    The margin keeps central finite differences away from the clip
    boundary; locked entries (zero range) stay at their only legal value.
    """
    lo, hi = template.limit_min, template.limit_max
    span = hi - lo
    art = rng.uniform(lo + margin * span, hi - margin * span, ARTICULATION_DIM)
    art[span == 0] = lo[span == 0]
    return HandParams(
        articulation=art,
        rotation=rng.uniform(-0.8, 0.8, 3),
        translation=np.array([
            rng.uniform(-0.08, 0.08),
            rng.uniform(-0.08, 0.08),
            rng.uniform(*depth),
        ]),
    )
