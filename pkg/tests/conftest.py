import itertools
import math

import pytest


def all_sign_tuples(K):
    return itertools.product((1, -1), repeat=K)


def brute_tau_product(sets, K):
    """E[prod tau_S] by averaging over every sign tuple, using explicit products."""
    total = 0
    for signs in all_sign_tuples(K):
        v = 1
        for S in sets:
            for i in S.elements:
                v *= signs[i - 1]
        total += v
    return total / 2 ** K


@pytest.fixture
def sqrt2():
    return math.sqrt(2.0)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Call ``criterion(label, ok, detail)`` once per acceptance check; a test
    that errors before reporting is logged as FAIL."""
    reported = []

    def report(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        reported.append(ok)
        assert ok, line

    yield report
    if not reported:
        _ACCEPTANCE_LINES.append(f"FAIL {request.node.name}: raised before reporting")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
