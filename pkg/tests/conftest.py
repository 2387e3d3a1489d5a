import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            number, title = value
            prev = _RESULTS.get(number, (title, True, []))
            details = prev[2] + [v for k, v in report.user_properties if k == "detail"]
            _RESULTS[number] = (title, prev[1] and report.passed, details)


@pytest.fixture(autouse=True)
def _criterion_tag(request):
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        request.node.user_properties.append(("criterion", tuple(marker.args)))


@pytest.fixture
def detail(request):
    """Attach a measured value to the acceptance summary line."""

    def add(text):
        request.node.user_properties.append(("detail", text))

    return add


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, details = _RESULTS[number]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line)
        for d in details:
            terminalreporter.write_line(f"    {d}")
