import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)




ACCEPTANCE = {}


@pytest.fixture
def record():
    """``record(n, ok, detail, part="")`` files one acceptance line; the test still asserts ``ok``."""

    def _record(n, ok, detail, part=""):
        ACCEPTANCE[(n, part)] = (bool(ok), detail)
        print(f"criterion {n}{part}: {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, part in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n, part]
        terminalreporter.write_line(f"criterion {f'{n}{part}':>3}: {'PASS' if ok else 'FAIL'}  {detail}")
