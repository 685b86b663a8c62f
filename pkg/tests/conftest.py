"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

_DOCS: dict[str, str] = {}
_OUTCOMES: dict[str, str] = {}


def _is_criterion(nodeid: str) -> bool:
    return "test_acceptance.py::test_criterion_" in nodeid


def pytest_collection_modifyitems(items):
    for item in items:
        if _is_criterion(item.nodeid):
            doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
            _DOCS[item.nodeid] = doc


def pytest_runtest_logreport(report):
    if not _is_criterion(report.nodeid):
        return
    if report.when == "call" or report.failed or report.skipped:
        prev = _OUTCOMES.get(report.nodeid)
        if prev in ("FAIL", "SKIP"):
            return
        _OUTCOMES[report.nodeid] = "FAIL" if report.failed else ("SKIP" if report.skipped else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for nodeid, doc in _DOCS.items():
        if nodeid in _OUTCOMES:
            tr.write_line(f"{_OUTCOMES[nodeid]:4s}  {doc}")
