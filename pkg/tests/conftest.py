import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from pursuit.geometry import load_environment  # noqa: E402
from pursuit.surveillance import Surveillance  # noqa: E402

ENV_DIR = Path(__file__).resolve().parents[1] / "environments"
FIXTURES = ["convex", "l_room", "comb", "square_hole", "dumbbell"]
START = {"dumbbell": 11}

settings.register_profile(
    "default", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def env_path(name: str) -> Path:
    return ENV_DIR / f"{name}.json"


_envs = {}
_models = {}


def load(name):
    if name not in _envs:
        _envs[name] = load_environment(env_path(name))
    return _envs[name]


def model_of(name) -> Surveillance:
    if name not in _models:
        _models[name] = Surveillance(load(name))
    return _models[name]


@pytest.fixture
def square_hole():
    return load("square_hole")


@pytest.fixture
def l_room():
    return load("l_room")


@pytest.fixture
def convex():
    return load("convex")
