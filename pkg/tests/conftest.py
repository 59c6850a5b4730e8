import numpy as np
import pytest

from ddsp_vocoder.core import DEFAULT_CONFIG, FeatureTrack

ACCEPTANCE_RESULTS: list[str] = []


@pytest.fixture
def config():
    return DEFAULT_CONFIG


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_track(rng, n, f0_range=(90.0, 260.0), v_mean=-2.0):
    f0 = rng.uniform(*f0_range, n)
    p = rng.uniform(0.0, 1.0, (n, DEFAULT_CONFIG.periodicity_dims))
    v = rng.normal(v_mean, 0.7, (n, DEFAULT_CONFIG.spectrum_bins))
    return FeatureTrack(f0, p, v)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
