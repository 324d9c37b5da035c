import pytest

from rvv.engine import CCMode, Engine, EngineConfig, Row, RowKey, StampKind, VersionStamp

ACCT = RowKey("acct", "101")


def account(balance=1000, kind=StampKind.COUNTER, key=ACCT):
    return Row(key, {"balance": balance}, VersionStamp(kind, 0))


def config(mode=CCMode.LSCC, kind=StampKind.COUNTER, resolution=1):
    return EngineConfig(mode, kind, resolution)


@pytest.fixture
def lscc():
    return Engine(config(), [account()])


@pytest.fixture
def mvcc():
    return Engine(config(CCMode.MVCC), [account()])


# one PASS/FAIL line per acceptance criterion, shown in the terminal summary
_criteria: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    n, title = marker.args
    ok = report.passed and _criteria.get(n, (title, True))[1]
    _criteria[n] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, ok = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
