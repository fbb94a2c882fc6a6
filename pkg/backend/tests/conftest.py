"""
Pytest Configuration
Fixtures and configuration for running tests.
"""
import pytest  # type: ignore[import-not-found]
import os
import sys

# Add the backend directory to the path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import hypothesis
import numpy as np
from fastapi.testclient import TestClient

from app.main import app
from app.core.config import LinkerConfig, SsimParams
from app.models.detection import Box, Detection
from app.models.frame import Frame
from app.schemas.scenario import Actor, NoiseParams, Occlusion, Scenario, ScenarioFile


# =============================================================================
# HYPOTHESIS PROFILES
# =============================================================================

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.register_profile("thorough", deadline=None, max_examples=1000)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


# =============================================================================
# HELPERS
# =============================================================================

def make_det(box, scores, frame=0) -> Detection:
    """Detection from a box list and a score sequence"""
    return Detection(box=Box(*[float(v) for v in box]), scores=tuple(float(s) for s in scores), frame=frame)


def textured_frame(seed: int, height: int = 32, width: int = 32, channels: int = 3, index: int = 0) -> Frame:
    """Seeded uniform-noise frame with integer grey levels"""
    rng = np.random.default_rng(seed)
    return Frame(index=index, pixels=np.floor(rng.uniform(0, 256, size=(height, width, channels))))


# =============================================================================
# FIXTURES
# =============================================================================

@pytest.fixture(scope="function")
def client():
    """Test client for the HTTP service"""
    return TestClient(app)


@pytest.fixture
def ssim_params():
    return SsimParams()


@pytest.fixture
def linker_config():
    """Default linker: lambda 0.5, k 5, extrapolation on, box prediction off"""
    return LinkerConfig()


@pytest.fixture
def static_scenario():
    """One static actor over 10 frames"""
    return Scenario(
        num_frames=10,
        width=64,
        height=48,
        num_classes=2,
        channels=3,
        actors=[Actor(label=1, start=0, end=9, size=(10, 10), origin=(20, 10))],
    )


@pytest.fixture
def moving_scenario_file():
    """Two actors with an occlusion window, mild jitter and no false positives"""
    scenario = Scenario(
        num_frames=30,
        width=96,
        height=64,
        num_classes=3,
        channels=3,
        actors=[
            Actor(label=0, start=0, end=29, size=(16, 16), origin=(4, 8), velocity=(2, 0)),
            Actor(label=2, start=5, end=24, size=(12, 20), origin=(70, 30), velocity=(-1, 0.5)),
        ],
        occlusions=[Occlusion(actor=0, start=12, end=14)],
    )
    noise = NoiseParams(p_miss=0.0, jitter_sigma=0.5, fp_rate=0.0, score_lo=0.6, score_hi=0.95)
    return ScenarioFile(scenario=scenario, noise=noise, seed=7)
