import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA: list[str] = []


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance check, shown in the terminal summary."""
    notes: dict = {}

    def note(text: str) -> None:
        notes["detail"] = text

    yield note
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    xfail = rep is not None and hasattr(rep, "wasxfail")
    verdict = "PASS" if ok and not xfail else "XPASS" if ok else "FAIL (expected)" if xfail else "FAIL"
    line = f"{request.node.name}: {verdict}"
    if notes.get("detail"):
        line += f"  [{notes['detail']}]"
    print(line)
    _CRITERIA.append(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
