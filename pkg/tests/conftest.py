import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from iterfilter import from_arrays  # noqa: E402


def movielens_path():
    """Location of the real MovieLens 100k ``u.data``, if available."""
    candidates = [os.environ.get("ITERFILTER_MOVIELENS", ""),
                  Path(__file__).parent.parent / "data" / "ml-100k" / "u.data",
                  Path(__file__).parent / "data" / "u.data"]
    for c in candidates:
        if c and Path(c).is_file():
            return Path(c)
    return None


@pytest.fixture(scope="session")
def movielens():
    path = movielens_path()
    if path is None:
        pytest.skip("MovieLens 100k u.data not available (set ITERFILTER_MOVIELENS)")
    from iterfilter import ingest
    return ingest.load(path)


@pytest.fixture(scope="session")
def surrogate():
    from iterfilter.synthetic import movielens_like
    return movielens_like(seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_raters():
    """Three raters on a single item: 0.5, 0.5 and 1.0."""
    return from_arrays([0, 1, 2], [0, 0, 0], [0.5, 0.5, 1.0])


@pytest.fixture
def two_by_two():
    return from_arrays([0, 0, 1, 1], [0, 1, 0, 1], [1.0, 0.0, 1.0, 1.0])


# -- acceptance summary -------------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL/SKIP line each at the
# end of the run, with any ``record_property("detail", ...)`` text appended.

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    status = None
    if rep.when == "setup" and rep.skipped:
        status = "SKIP"
    elif rep.when == "setup" and rep.failed:
        status = "FAIL"
    elif rep.when == "call":
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
    if status is None:
        return
    detail = dict(item.user_properties).get("detail", "")
    if status == "SKIP" and not detail:
        detail = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else ""
    _CRITERIA[n] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[n]
        line = f"criterion {n:2d} {status:4s} {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)
