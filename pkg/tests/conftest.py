import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion checked by this test")


def _record(item, status):
    number, title = item.get_closest_marker("acceptance").args
    entry = _RESULTS.setdefault(number, {"titles": [], "statuses": []})
    if title not in entry["titles"]:
        entry["titles"].append(title)
    entry["statuses"].append(status)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.get_closest_marker("acceptance") is None:
        return
    if rep.when == "setup" and rep.skipped:
        _record(item, "SKIP")
    elif rep.when == "setup" and rep.failed:
        _record(item, "FAIL")
    elif rep.when == "call":
        _record(item, "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        statuses = _RESULTS[number]["statuses"]
        if "FAIL" in statuses:
            verdict = "FAIL"
        elif all(s == "SKIP" for s in statuses):
            verdict = "SKIP"
        elif "SKIP" in statuses:
            verdict = "PASS*"  # some sub-checks skipped
        else:
            verdict = "PASS"
        title = "; ".join(_RESULTS[number]["titles"])
        terminalreporter.write_line(f"criterion {number:>2}: {verdict:<5} {title}")
