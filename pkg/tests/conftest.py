import numpy as np
import pytest

from hidimcov.model import CoefficientScheme, InnovationSpec


@pytest.fixture
def gauss():
    return InnovationSpec("gaussian", 1.0)


@pytest.fixture
def ar_half():
    return CoefficientScheme("ar1_geometric", d=1, params={"rho": 0.5})


def random_scheme(rng, d, J=64):
    """Mixed table of AR(1) and power-decay columns with random signs."""
    lags = np.arange(J + 1)
    table = np.empty((J + 1, d))
    for k in range(d):
        if rng.random() < 0.5:
            table[:, k] = rng.uniform(-0.8, 0.8) ** lags
        else:
            table[:, k] = rng.uniform(0.3, 1.5) * np.maximum(lags, 1.0) ** -0.875
        table[:, k] *= rng.choice([-1.0, 1.0])
    return CoefficientScheme("table", d=d, J=J, params={"table": table})


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion and assert it."""
    def report(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
