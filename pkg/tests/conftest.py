import mpmath
import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mp_derivs(fn, x, order, dps=40):
    """Reference derivatives by mpmath's own differentiation (independent of jet code)."""
    with mpmath.workdps(dps):
        return [float(mpmath.diff(fn, mpmath.mpf(x), k)) for k in range(order + 1)]


def rel_err(got, want, floor=1.0):
    return max(abs(a - b) / max(floor, abs(b)) for a, b in zip(got, want))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, ok: bool, detail: str):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
