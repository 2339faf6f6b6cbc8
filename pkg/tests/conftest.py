import numpy as np
import pytest

from sqg.spectral import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def g16():
    return GridSpec(16)


@pytest.fixture(scope="session")
def g32():
    return GridSpec(32)


@pytest.fixture(scope="session")
def g64():
    return GridSpec(64)


@pytest.fixture(scope="session")
def g128():
    return GridSpec(128)


# -- acceptance summary: one pass/fail line per criterion ---------------------

_ACCEPTANCE_DETAIL = {}
_ACCEPTANCE_OUTCOME = {}


@pytest.fixture
def record(request):
    """Attach a measured-value summary to the running acceptance test."""

    def _record(message):
        _ACCEPTANCE_DETAIL[request.node.nodeid] = message

    return _record


def _criterion_label(nodeid):
    name = nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_c"):
        return None
    num, _, rest = name[len("test_c"):].partition("_")
    return int(num), rest.replace("_", " ")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or _criterion_label(report.nodeid) is None:
        return
    if report.when == "call" or report.outcome != "passed":
        prev = _ACCEPTANCE_OUTCOME.get(report.nodeid)
        if prev != "failed":
            _ACCEPTANCE_OUTCOME[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOME:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_ACCEPTANCE_OUTCOME, key=lambda n: _criterion_label(n)[0]):
        num, label = _criterion_label(nodeid)
        verdict = "PASS" if _ACCEPTANCE_OUTCOME[nodeid] == "passed" else "FAIL"
        detail = _ACCEPTANCE_DETAIL.get(nodeid, "")
        terminalreporter.write_line(f"criterion {num:2d} {verdict}  {label}" + (f": {detail}" if detail else ""))
