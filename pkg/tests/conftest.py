"""Collect acceptance outcomes and print one PASS/FAIL line per criterion."""
import pytest

_RESULTS: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.get_closest_marker("acceptance") is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _RESULTS[item.name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in sorted(_RESULTS.items(), key=lambda kv: int(kv[0].split("_")[2])):
        terminalreporter.write_line(f"{verdict} {name}")
