import contextlib
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from actplan.scenario import load_scenario, shipped_scenarios  # noqa: E402

ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record a pass/fail line for an acceptance criterion."""
    try:
        yield
    except BaseException as exc:
        if isinstance(exc, pytest.skip.Exception):
            raise
        ACCEPTANCE[number] = ("FAIL", title, str(exc).splitlines()[0] if str(exc) else type(exc).__name__)
        raise
    ACCEPTANCE[number] = ("PASS", title, "")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, why = ACCEPTANCE[n]
        line = f"criterion {n:>2} {status}: {title}"
        if why:
            line += f"  ({why})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def scenarios():
    return {name: load_scenario(path) for name, path in shipped_scenarios().items()}
