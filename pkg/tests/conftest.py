import functools
from pathlib import Path

import pytest

from equidisp.equidisp_model import EquiDispParams, normalize, sample
from equidisp.numerics import RandomStream

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
SCHEMAS = ROOT / "docs" / "schemas"


@functools.lru_cache(maxsize=None)
def simulated(alpha, beta, gamma, n, seed=11, stream=0):
    """Cached draw from the equi-dispersed model."""
    m = normalize(EquiDispParams(alpha, beta, gamma))
    return sample(m, n, RandomStream(seed, stream))


@pytest.fixture(scope="session")
def strong_1000():
    return simulated(1.0, 4.0, 5.0, 1000)


# --- acceptance criteria reporting -------------------------------------------
# Tests marked ``criterion(number, title)`` are summarized as one PASS/FAIL line
# per criterion at the end of the run.

_criteria: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args
    entry = _criteria.setdefault(num, [title, True, False])
    if rep.failed:
        entry[1] = False
    if rep.when == "call":
        entry[2] = True
        if rep.skipped:
            entry[1] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(_criteria):
        title, ok, ran = _criteria[num]
        status = "PASS" if ok and ran else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}")
