import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "qhe", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("qhe")


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "call" and report.outcome != "passed")
    if failed:
        _ACCEPTANCE[number] = (title, "FAIL")
    elif report.when == "call":
        _ACCEPTANCE.setdefault(number, (title, "PASS"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
