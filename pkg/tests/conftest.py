import math

import numpy as np
import pytest

from boundecay.geometry import DomainSpec, build_domain, distance_to_boundary
from boundecay.operator import assemble_weighted_laplacian
from boundecay.spectral import eigensolve


def discrete_sine_eigenvalues(N, length=1.0):
    """Eigenvalues of the second-difference Dirichlet matrix on N - 1 nodes."""
    h = length / N
    k = np.arange(1, N)
    return 4.0 / h**2 * np.sin(k * math.pi * h / (2 * length)) ** 2


class Setup:
    def __init__(self, generator, params, h):
        self.domain = build_domain(DomainSpec(generator, params, h))
        self.dist = distance_to_boundary(self.domain)
        self.op = assemble_weighted_laplacian(self.domain)
        self.eig = eigensolve(self.op)


@pytest.fixture(scope="session")
def interval64():
    return Setup("interval", (1.0,), 1 / 64)


@pytest.fixture(scope="session")
def interval256():
    return Setup("interval", (1.0,), 1 / 256)


@pytest.fixture(scope="session")
def square20():
    return Setup("rectangle", (1.0, 1.0), 1 / 20)


@pytest.fixture(scope="session")
def square40():
    return Setup("rectangle", (1.0, 1.0), 1 / 40)


ACCEPTANCE_LINES = {}


def record_acceptance(number, title, passed, detail):
    """Store the one-line verdict printed at the end of the session."""
    verdict = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES[number] = f"[{verdict}] criterion {number}: {title} ({detail})"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
