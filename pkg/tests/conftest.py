import os

import hypothesis
import numpy as np
import pytest

from synchronizer.scene import ScenarioSpec, generate_scenario
from synchronizer.sro_model import OuParams

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=50, deadline=None, derandomize=True)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale simulation runs (deselect with -m 'not slow')")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def white_noise(rng):
    def make(n: int) -> np.ndarray:
        return rng.standard_normal(n)
    return make


def constant_sro_spec(duration: float = 60.0, sro_ppm: float = 40.0, sto_seconds: float = 0.25, seed: int = 3):
    """One talker, node 2 runs ``sro_ppm`` fast with a fixed start offset."""
    return ScenarioSpec(
        node_positions=[[1.0, 1.0, 1.2], [4.5, 3.0, 1.2]],
        source_positions=[[2.0, 3.0, 1.5]],
        duration=duration,
        pause_range=None,
        snr_db=30.0,
        ou_params=(
            OuParams(sigma_ou=0.0, mu_inf=0.0),
            OuParams(sigma_ou=0.0, mu_inf=sro_ppm),
        ),
        sto_seconds=(0.0, sto_seconds),
        seed=seed,
        name='constant-sro',
    )


@pytest.fixture(scope="session")
def constant_sro_scene():
    """(spec, pair, truth) of a 60 s constant-SRO recording, shared by the slow tests."""
    spec = constant_sro_spec()
    pair, truth = generate_scenario(spec)
    return spec, pair, truth


@pytest.fixture
def short_scene():
    """A 12 s two-position scene for fast structural checks."""
    spec = ScenarioSpec(
        node_positions=[[1.0, 1.0, 1.2], [4.0, 3.5, 1.2]],
        source_positions=[[2.0, 3.0, 1.5], [3.5, 1.0, 1.5]],
        duration=12.0,
        pause_range=(0.5, 1.0),
        utterance_duration=(1.0, 2.0),
        ou_params=(
            OuParams(mu_inf=-10.0, sigma_ou=0.05, delta_start=2.0),
            OuParams(mu_inf=15.0, sigma_ou=0.05),
        ),
        sto_seconds=(0.0, -0.1),
        seed=11,
        name='short',
    )
    pair, truth = generate_scenario(spec)
    return spec, pair, truth
