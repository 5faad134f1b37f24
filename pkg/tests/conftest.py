import math
import os

import pytest
from hypothesis import HealthCheck, settings

from outage_lab.core import ChannelSpec

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

LN3 = math.log(3.0)


@pytest.fixture(scope="session")
def counter_spec():
    """r=2, R=ln 3, P=0.5: the split where the interior beats both candidates."""
    return ChannelSpec(2, 2, LN3, 0.5)


@pytest.fixture(scope="session")
def holds_spec():
    return ChannelSpec(2, 2, 4.0, 4.0)
