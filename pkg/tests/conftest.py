import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.REPORT):
        title, checks = mod.REPORT[n]
        ok = all(passed for _, passed, _ in checks)
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}")
        for label, passed, detail in checks:
            terminalreporter.write_line(f"    [{'ok' if passed else 'FAIL'}] {label}: {detail}")
