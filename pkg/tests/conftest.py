import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

import shuntlab as sl  # noqa: E402
from helpers import BEAM_CP, BEAM_F_OC, BEAM_F_SC  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def beam():
    return sl.PiezoModel.from_frequencies_hz(BEAM_F_SC, BEAM_F_OC, BEAM_CP)


@pytest.fixture(scope="session")
def beam_shunt(beam):
    return sl.tune_series_rl(beam)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = getattr(item, "criterion_detail", "")
        status = "PASS" if rep.passed else "FAIL"
        line = f"[{status}] criterion {mark.args[0]}: {mark.args[1]}" + (f" ({detail})" if detail else "")
        _criteria.append((mark.args[0], line))
        # one line per criterion, visible live even under output capture
        sys.__stdout__.write("\n" + line + "\n")
        sys.__stdout__.flush()


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_criteria):
        terminalreporter.write_line(line)
