import sys
from collections import defaultdict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hidden_dynamics import SwitchingSystem  # noqa: E402

G_QUAD = ["2*(l^2-1)", "0"]

# criterion number -> list of (test name, passed, detail)
_CRITERIA = defaultdict(list)
_DETAILS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by this test")


@pytest.fixture
def fil_system():
    """Nonlinear sliding with branches +-1/sqrt 2 where the linear combination crosses."""
    return SwitchingSystem.from_strings(["1", "1"], ["1", "-2"], "x1", G_QUAD, name="fil_system")


@pytest.fixture
def reg_system():
    """The two-branch system with the fields swapped; its attracting branch is -1/sqrt 2."""
    return SwitchingSystem.from_strings(["1", "-2"], ["1", "1"], "x1", G_QUAD, name="reg_system")


@pytest.fixture
def report(request):
    """Attach a one-line summary (measured values) to the criterion line."""
    def record(text):
        _DETAILS[request.node.nodeid] = text
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    passed = rep.passed and not hasattr(rep, "wasxfail")
    if passed:
        detail = _DETAILS.get(item.nodeid, "")
    elif hasattr(rep, "wasxfail"):
        detail = f"{item.name}: {rep.wasxfail}"
    else:
        msg = str(call.excinfo.value).strip().splitlines()[0] if call.excinfo else "failed"
        detail = f"{item.name}: {msg}"
    _CRITERIA[marker.args[0]].append((item.name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        rows = _CRITERIA[n]
        ok = all(p for _, p, _ in rows)
        details = "; ".join(d for _, _, d in rows if d)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {details}")
