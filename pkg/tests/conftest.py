import pytest

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    num = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        title = (item.function.__doc__ or item.name).strip().splitlines()[0]
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _CRITERIA[num] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}")
    passed = sum(s == "PASS" for s, _ in _CRITERIA.values())
    terminalreporter.write_line(f"{passed}/{len(_CRITERIA)} criteria passed")
