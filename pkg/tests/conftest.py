import pytest

_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and rep.passed:
        return
    entry = _CRITERIA.setdefault(marker.args[0], [True, []])
    entry[0] = entry[0] and rep.passed
    entry[1] += [v for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, details = _CRITERIA[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}"
        if details:
            line += " | " + "; ".join(details)
        terminalreporter.write_line(line)
