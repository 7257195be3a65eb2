import os

import pytest
from hypothesis import HealthCheck, settings

from idmwp.scenarios import builtin_scenarios

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def catalog():
    return builtin_scenarios()


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report(capsys):
    """Emit one PASS/FAIL line for an acceptance criterion and return the verdict."""

    def emit(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {title}"
        if detail:
            line += f" [{detail}]"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
