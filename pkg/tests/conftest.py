import sys

import pytest

from detq import _backend

BACKENDS = ["python"]
try:
    _backend.get("cython")
    BACKENDS.append("cython")
except ImportError:
    pass


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(results):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}")
    passed = sum(ok for *_, ok, _ in results)
    terminalreporter.write_line(f"{passed}/{len(results)} acceptance criteria passed")
