import numpy as np
import pytest

from phaseless.lattices import SqrtLattice, generate


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def lattice_024():
    """Admissible rectangular square-root lattice, alpha = 0.24, radius 4."""
    return generate(SqrtLattice(0.24 * np.eye(2), 4.0))


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance line, then fail the test if any check failed."""

    def report(number, title, checks, detail=""):
        ok = all(bool(v) for _, v in checks)
        failed = [name for name, v in checks if not v]
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        if failed:
            line += " failed: " + ", ".join(failed)
        ACCEPTANCE[number] = line
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
