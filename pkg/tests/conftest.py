from __future__ import annotations

import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from _support import corpus_cases  # noqa: E402


@pytest.fixture(scope="session")
def cases():
    return corpus_cases()


@pytest.fixture(scope="session")
def programs(cases):
    return {c.name: c.program() for c in cases}
