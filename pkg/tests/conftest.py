import re
import time
from contextlib import contextmanager

import pytest

_LINES = []


class _Record:
    def __init__(self, number, title, budget):
        self.number = number
        self.title = title
        self.budget = budget
        self.values = {}

    def __setitem__(self, key, value):
        self.values[key] = value


@pytest.fixture
def criterion():
    """Time a block, keep its figures and log one pass/fail line for it."""

    @contextmanager
    def run(number, title, budget):
        rec = _Record(number, title, budget)
        t0 = time.perf_counter()
        ok = False
        try:
            yield rec
            ok = True
        finally:
            elapsed = time.perf_counter() - t0
            ok = ok and elapsed < budget
            figs = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in rec.values.items())
            line = f"criterion {number:<3} {'PASS' if ok else 'FAIL'}  {title} ({elapsed:.1f}s of {budget:g}s) {figs}"
            _LINES.append(line)
            print(line)
        assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget}s"

    return run


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        key = lambda s: (int(re.match(r"\d+", s.split()[1]).group()), s.split()[1])
        for line in sorted(_LINES, key=key):
            terminalreporter.write_line(line)
