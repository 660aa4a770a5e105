import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from nestedot.measures import DiscreteMeasure, RandomMeasure

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

coords = st.floats(-5, 5, allow_nan=False, allow_infinity=False, width=64)


@st.composite
def measures(draw, dim=None, max_atoms=5, uniform=False):
    d = draw(st.integers(1, 3)) if dim is None else dim
    n = draw(st.integers(1, max_atoms))
    atoms = np.array(draw(st.lists(st.lists(coords, min_size=d, max_size=d), min_size=n, max_size=n)))
    if uniform:
        w = np.full(n, 1.0 / n)
    else:
        raw = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)))
        w = raw / raw.sum()
    return DiscreteMeasure(atoms, w)


@st.composite
def random_measures(draw, dim=2, max_outer=3, max_inner=3):
    k = draw(st.integers(1, max_outer))
    comps = [draw(measures(dim=dim, max_atoms=max_inner)) for _ in range(k)]
    raw = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    return RandomMeasure(comps, raw / raw.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
