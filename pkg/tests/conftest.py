import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_collection_modifyitems(config, items):
    if os.environ.get("LRT_FULL_SCALE") == "1":
        return
    skip = pytest.mark.skip(reason="full-scale smoke test; set LRT_FULL_SCALE=1")
    for item in items:
        if "optional" in item.keywords:
            item.add_marker(skip)
