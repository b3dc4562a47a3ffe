import pytest

from mvrpb.model import CvrpBase, MvrpbInstance, PeriodDemand

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for the acceptance summary."""

    def record(key: str, ok: bool, detail: str = ""):
        _CRITERIA[key] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k.split()[0])):
        ok, detail = _CRITERIA[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")


@pytest.fixture
def tiny_instance():
    """Depot plus four clients on a line, one period, capacity 10."""
    base = CvrpBase("tiny", ((0, 0), (3, 4), (6, 8), (-3, -4), (-6, -8)), (0, 4, 4, 5, 5), 10)
    return MvrpbInstance(base, (PeriodDemand((1, 2, 3, 4), (4, 4, 5, 5)),), m=2)
