import numpy as np
import pytest

from l2stream.sampler import SamplerConfig

_ACCEPTANCE_LINES: list[str] = []


def small_config(n: int, **kw) -> SamplerConfig:
    """Sketch sizes small enough for unit tests; the decode rule is unchanged."""
    base = dict(n=n, eps=0.25, C=2.0, R=400, rows=3, ams_groups=1, seed=11)
    base.update(kw)
    return SamplerConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
