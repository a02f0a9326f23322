import numpy as np
import pytest

from wigner2e.core import GaussianPacket, WignerGrid


@pytest.fixture
def grid32():
    return WignerGrid(d=1, n_x=32, x_min=-8.0, x_max=8.0,
                      coherence_length=8.0, n_p=32)


@pytest.fixture
def grid16():
    return WignerGrid(d=1, n_x=16, x_min=-8.0, x_max=8.0,
                      coherence_length=8.0, n_p=16)


@pytest.fixture
def approach_packets():
    return (GaussianPacket(center_r=(-3.0,), center_p=(1.0,), sigma=(0.8,)),
            GaussianPacket(center_r=(3.0,), center_p=(-1.0,), sigma=(0.8,)))


def l2(a, b=None):
    a = np.asarray(a)
    if b is not None:
        a = a - np.asarray(b)
    return float(np.sqrt(np.sum(a * a)))


CRITERION_LINES = []


@pytest.fixture
def criterion():
    """Record and print a one-line verdict for an acceptance criterion."""
    def _record(num, name, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        line = f"[criterion {num:2d}] {status}  {name}"
        if detail:
            line += f"  ({detail})"
        CRITERION_LINES.append(line)
        print(line)
        assert ok, line
    return _record


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
