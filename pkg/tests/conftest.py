import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sgmw2.mixture import GaussianMixture

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def std2():
    return GaussianMixture.standard_normal(2)


@pytest.fixture
def two_mode():
    """Equal-weight modes at +-2 e1 with unit scale in d=2."""
    return GaussianMixture.symmetric(np.array([2.0, 0.0]), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; returns the pass flag so callers can assert on it."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}" + (f": {detail}" if detail else "")
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
