import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def group():
    from bersmetrics.fuchsia import build_genus2_group
    return build_genus2_group()


@pytest.fixture(scope="session")
def basis():
    from bersmetrics.autoforms import hqd_basis
    return hqd_basis()


@pytest.fixture(scope="session")
def base256():
    from bersmetrics.bersdeform import fuchsian_bers
    from bersmetrics.fields import Grid
    return fuchsian_bers(Grid.square(1.05, 256))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
