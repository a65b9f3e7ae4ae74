"""Shared pytest hooks: print one summary line per acceptance criterion."""

import re

# criterion number -> (passed, detail), filled in by test_acceptance.py
_RESULTS: dict = {}
_COLLECTED: set = set()


def record_acceptance(criterion: int, passed: bool, detail: str) -> None:
    _RESULTS[criterion] = (passed, detail)


def pytest_collection_modifyitems(items):
    for item in items:
        match = re.search(r"test_criterion_(\d+)", item.name)
        if match:
            _COLLECTED.add(int(match.group(1)))


def pytest_terminal_summary(terminalreporter):
    if not _COLLECTED:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_COLLECTED):
        if n in _RESULTS:
            passed, detail = _RESULTS[n]
            status = "PASS" if passed else "FAIL"
        else:
            status, detail = "FAIL", "not evaluated: the test errored out"
        terminalreporter.write_line(f"ACCEPTANCE {n}: {status} ({detail})")
