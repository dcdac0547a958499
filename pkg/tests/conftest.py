import pytest

_CRITERIA: dict[int, tuple[bool, str]] = {}


class CriterionReport:
    """Collects sub-checks of one acceptance criterion and records a single verdict."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.checks: list[tuple[str, bool, str]] = []

    def check(self, name: str, ok, detail: str = "") -> bool:
        self.checks.append((name, bool(ok), detail))
        return bool(ok)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def finish(self):
        parts = [f"{n}={'ok' if ok else 'FAIL'}" + (f" ({d})" if d else "") for n, ok, d in self.checks]
        _CRITERIA[self.number] = (self.passed, f"{self.title}: " + "; ".join(parts))
        failed = [n for n, ok, _ in self.checks if not ok]
        assert not failed, f"criterion {self.number} failed checks: {failed}"


@pytest.fixture
def criterion():
    def make(number, title):
        return CriterionReport(number, title)
    return make


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, line = _CRITERIA[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {line}")
