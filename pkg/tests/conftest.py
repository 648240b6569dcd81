import numpy as np
import pytest


def random_stable(rng, n, scale=1.0):
    """Stable matrix with moderate norm: a random draw shifted left of the imaginary axis."""
    while True:
        A = rng.normal(size=(n, n)) * scale
        shift = np.max(np.linalg.eigvals(A).real)
        A = A - (shift + rng.uniform(0.1, 1.0) * scale) * np.eye(n)
        if np.linalg.norm(A) <= 10.0:
            return A


def random_spd(rng, n):
    G = rng.normal(size=(n, n))
    return G @ G.T + 0.1 * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL/SKIP line for an acceptance criterion."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, label, status, detail=""):
        if isinstance(status, (bool, np.bool_)):
            status = "PASS" if status else "FAIL"
        line = f"criterion {number:>2} {label:<28} {status:<4}  {detail}".rstrip()
        lines.append((number, label, line))
        print(line)
        return status == "PASS"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, _, line in sorted(lines, key=lambda x: (x[0], x[1])):
            terminalreporter.write_line(line)
