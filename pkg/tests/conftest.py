import numpy as np
import pytest

from holoisac.array import ArrayConfig
from holoisac.channels import ScenarioParams, correlation_model, sensing_channel

_CRITERIA = {}


@pytest.fixture(scope="session")
def cfg():
    return ArrayConfig()


@pytest.fixture(scope="session")
def params():
    return ScenarioParams()


@pytest.fixture(scope="session")
def model(cfg, params):
    return correlation_model(cfg, params)


@pytest.fixture(scope="session")
def hs(cfg, params):
    return sensing_channel(cfg, params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    # collect one outcome per acceptance criterion (call phase, or setup errors)
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1][len("test_criterion_"):]
        _CRITERIA[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA):
        num, _, label = name.partition("_")
        status = "PASS" if _CRITERIA[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {int(num):2d} [{label}]: {status}")
