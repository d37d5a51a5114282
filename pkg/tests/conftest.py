import numpy as np
import pytest

from ebcif.channel import ChannelParams, blind_index_channel, preset


@pytest.fixture
def ref_channel():
    """delta1 = delta2 = 0.5, delta12 = 0.25, fully correlated feedback erased half the time."""
    return ChannelParams(0.5, 0.5, 0.25, preset("fully_correlated", 0.5))


@pytest.fixture
def one_sided():
    return ChannelParams(0.5, 0.5, 0.25, preset("one_sided", 1))


@pytest.fixture
def symmetric():
    return blind_index_channel(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One summary line per acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {name} ({detail})")
