from pathlib import Path

import pytest

from toolscope.fixtures import planted_benchmark, planted_toolset
from toolscope.pipeline import Settings

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def golden():
    return GOLDEN


@pytest.fixture(scope="session")
def planted():
    return planted_toolset(), planted_benchmark()


@pytest.fixture
def mock_settings():
    return Settings(mock=True)


# --- acceptance summary: one PASS/FAIL line per criterion ------------------------

_acceptance: dict[str, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    if report.when == "call" or report.failed or report.skipped:
        # parametrized cases of one criterion share a line
        label = report.nodeid.split("::")[-1].split("[")[0]
        prev_ok = _acceptance.get(label, (label, True))[1]
        _acceptance[label] = (label, prev_ok and report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok in sorted(_acceptance.values()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
