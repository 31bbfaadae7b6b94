import numpy as np
import pytest
from hypothesis import settings

from nsalpha_da.spectral import make_grid

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


@pytest.fixture
def grid8():
    return make_grid(2 * np.pi, 8)


@pytest.fixture
def grid16():
    return make_grid(2 * np.pi, 16)


@pytest.fixture
def grid32():
    return make_grid(2 * np.pi, 32)



ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def report():
    """Append one 'criterion: PASS/FAIL details' line to the end-of-run summary."""

    def add(label, ok, detail):
        line = f"{label:<34} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
