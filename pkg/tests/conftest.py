import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", deadline=None, max_examples=40, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

import pytest

N_CRITERIA = 9
_LINES = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_LINES, {})

    def report(number: int, title: str, checks: dict, detail: str = ""):
        failed = [name for name, ok in checks.items() if not ok]
        status = "FAIL" if failed else "PASS"
        line = f"{status} criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        if failed:
            line += " -- failed: " + ", ".join(failed)
        lines[number] = line
        print(line)
        assert not failed, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        terminalreporter.write_line(lines.get(n, f"NOT RUN criterion {n}"))
