import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spinbench.cli import load_config
from spinbench.core import SpinSystem

settings.register_profile(
    "spinbench", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("spinbench")


def iso_system(g=2.0, nuclear_spin=0.0, label="iso"):
    return SpinSystem(0.5, nuclear_spin, g * np.eye(3), site_label=label)


def random_symmetric(rng, scale):
    m = rng.normal(size=(3, 3)) * scale
    return 0.5 * (m + m.T)


def random_traceless(rng, scale):
    q = random_symmetric(rng, scale)
    return q - np.trace(q) / 3 * np.eye(3)


def random_er_like(rng, label="rand"):
    """S=1/2, I=7/2 with anisotropic g and hyperfine strong enough to mix."""
    g = random_symmetric(rng, 2.0) + np.diag(rng.uniform(2, 8, 3))
    a = random_symmetric(rng, 150.0) + np.diag(rng.uniform(100, 800, 3))
    q = random_traceless(rng, 8.0)
    return SpinSystem(0.5, 3.5, g, a, q, g_n=-0.1618, site_label=label)


@pytest.fixture(scope="session")
def er167():
    """Four literature-derived 167Er subsites (I.1, I.2, II.1, II.2)."""
    return load_config("builtin:er167-literature").systems


@pytest.fixture(scope="session")
def er_detected(er167):
    return er167[0]


# -- acceptance report ---------------------------------------------------------
# test_acceptance.py records one line per criterion here; the lines are echoed
# in the terminal summary so they show up without -s.

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    def report(criterion, ok, text, status=None):
        tag = status or ("PASS" if ok else "FAIL")
        line = f"{tag:<13} [{criterion}] {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
