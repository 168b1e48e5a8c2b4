import numpy as np
import pytest

from misocoal.scenario import ChannelSet, Scenario, sample_channels


def random_channels(n_links, antennas, seed, realization=0):
    return sample_channels(Scenario.iid(n_links, antennas), seed, realization)


def orthogonal_channels():
    """K=2, N=2: every cross channel orthogonal to the direct one."""
    return ChannelSet.from_vectors([
        [[1, 0], [0, 1]],   # h_11, h_12
        [[1, 0], [0, 1]],   # h_21, h_22
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES, key=lambda x: x[0]):
            terminalreporter.write_line(line)
