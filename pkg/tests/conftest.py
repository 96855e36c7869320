from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]

# criterion number -> (title, passed, detail), filled by test_acceptance
_VERDICTS: dict[int, tuple[str, bool, str]] = {}


class Verdict:
    def __init__(self, number: int, title: str) -> None:
        self.number = number
        self.title = title
        self.failures: list[str] = []
        self.notes: list[str] = []

    def check(self, label: str, ok: bool, detail: str = "") -> None:
        text = f"{label}: {detail}" if detail else label
        (self.notes if ok else self.failures).append(text)

    def close(self) -> None:
        passed = not self.failures
        detail = "; ".join(self.failures if self.failures else self.notes)
        _VERDICTS[self.number] = (self.title, passed, detail)
        assert passed, detail


@pytest.fixture
def verdict(request):
    """Collects sub-checks for one acceptance criterion and reports them once."""
    made: list[Verdict] = []

    def make(number: int, title: str) -> Verdict:
        v = Verdict(number, title)
        made.append(v)
        return v

    yield make
    for v in made:
        if v.number not in _VERDICTS:
            _VERDICTS[v.number] = (v.title, False, "aborted: " + "; ".join(v.failures or ["exception before verdict"]))


@pytest.fixture
def oval_scenario_path() -> Path:
    return ROOT / "scenarios" / "oval_icw.json"


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        title, passed, detail = _VERDICTS[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title} -- {detail}")
