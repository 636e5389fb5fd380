import numpy as np
import pytest

from fedpart.agent import AgentSettings
from fedpart.env import CostWeights, ObservationBounds, OffloadEnv
from fedpart.profiles import ProfileSpec, synthesize_profile
from fedpart.traces import Trace, TraceSynthesisSpec, synthesize_trace


@pytest.fixture(scope="session")
def default_profile():
    return synthesize_profile(ProfileSpec())


@pytest.fixture(scope="session")
def tiny_profile():
    """10-config space (2 cut points): fast to evaluate exhaustively."""
    return synthesize_profile(
        ProfileSpec(
            name="tiny",
            cut_points=2,
            delta0=2.0,
            total_flops=1000.0,
            sew_mflops_per_ms=3.0,
            phone_mflops_per_ms=20.0,
            cloud_mflops_per_ms=40.0,
            rng_seed=5,
        )
    )


@pytest.fixture(scope="session")
def tiny_settings():
    return AgentSettings(
        hidden=(8, 8, 4),
        dropout_rates=(0.2, 0.1, 0.0),
        lr=0.01,
        batch_size=16,
        buffer_capacity=64,
        target_update_freq=20,
    )


def make_tiny_env(profile, seed=0, l_max=400.0, weights=None):
    wifi = synthesize_trace(
        TraceSynthesisSpec(length=60, mean=50.0, variability=10.0, max_value=580.0), seed=11
    )
    fiveg = synthesize_trace(
        TraceSynthesisSpec(length=80, mean=20.0, variability=5.0, max_value=350.0), seed=12
    )
    return OffloadEnv.from_seed(
        profile,
        __import__("fedpart").DeviceProfile(),
        weights or CostWeights(l_max=l_max),
        ObservationBounds(),
        wifi,
        fiveg,
        seed,
    )


@pytest.fixture()
def tiny_env(tiny_profile):
    return make_tiny_env(tiny_profile)


@pytest.fixture(scope="session")
def constant_trace():
    return Trace(samples=np.full(40, 25.0), granularity_ms=250.0, source_label="const")
