from __future__ import annotations

import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def two_graphs(tmp_path: Path) -> Path:
    """A private copy of the two-graph fixture repository."""
    dst = tmp_path / "two_graphs"
    shutil.copytree(FIXTURES / "two_graphs", dst)
    return dst


_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        name = report.nodeid.split("::test_criterion_")[1]
        detail = dict(report.user_properties).get("detail", "")
        if report.failed:
            crash = getattr(report.longrepr, "reprcrash", None)
            detail = crash.message.splitlines()[0] if crash else str(report.longrepr).strip().splitlines()[-1]
        _ACCEPTANCE[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[0])):
        status, detail = _ACCEPTANCE[name]
        number, _, title = name.partition("_")
        terminalreporter.write_line(f"{status} criterion {number} ({title.replace('_', ' ')}): {detail}")
