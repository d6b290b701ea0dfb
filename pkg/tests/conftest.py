import pytest

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        details = [v for k, v in item.user_properties if k == "detail"]
        prev = _ACCEPTANCE.get(number)
        passed = not failed and report.passed
        if prev is not None:
            passed = passed and prev[1]
            details = [prev[2]] * bool(prev[2]) + details
        _ACCEPTANCE[number] = (title, passed, "; ".join(details))


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary."""
    def add(text):
        request.node.user_properties.append(("detail", text))
    return add


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, details = _ACCEPTANCE[number]
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {title}"
        if details:
            line += f"  [{details}]"
        terminalreporter.write_line(line)
