import numpy as np
import pytest

from hydrolimit.collision import bgk_backend, maxwell_cutoff_backend
from hydrolimit.fields import Grid
from hydrolimit.velocity import build_basis


@pytest.fixture(scope="session")
def basis6():
    return build_basis(6)


@pytest.fixture(scope="session")
def bgk(basis6):
    return bgk_backend(basis6, 1.0)


@pytest.fixture(scope="session")
def maxwell(basis6):
    return maxwell_cutoff_backend(basis6)


@pytest.fixture(scope="session")
def grid8():
    return Grid(8, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CRITERIA = []


@pytest.fixture(scope="session")
def criterion():
    """Record one acceptance verdict; all verdicts are printed in the terminal summary."""

    def record(name: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
