from pathlib import Path

import numpy as np
import pytest

from collabpriv.core_model import Dataset, ItemFeatureTable, Rating, RatingProfile

DATA = Path(__file__).resolve().parents[1] / "data" / "ml-100k"


@pytest.fixture(scope="session")
def ml_paths():
    ratings, items = DATA / "u.data", DATA / "u.item"
    if not ratings.exists():
        pytest.skip("MovieLens files missing; run scripts/fetch_movielens.py")
    return ratings, items


@pytest.fixture(scope="session")
def movielens(ml_paths):
    from collabpriv.core_model import load_movielens
    return load_movielens(*ml_paths)


@pytest.fixture(scope="session")
def features():
    return ItemFeatureTable({
        1: [1, 0, 0],
        2: [0, 1, 0],
        3: [0, 0, 1],
        4: [1, 1, 0],
        5: [0.5, 0.5, 0.5],
        6: [0, 1, 1],
    }, names=["Action", "Comedy", "Drama"])


@pytest.fixture(scope="session")
def tiny(features):
    table = {
        "a": {1: 5, 2: 3, 3: 4, 4: 1},
        "b": {1: 4, 2: 2, 5: 5, 6: 3},
        "c": {2: 5, 3: 1, 4: 2, 5: 4, 6: 4},
    }
    ratings = [Rating(u, i, v) for u, row in table.items() for i, v in row.items()]
    return Dataset(ratings, features)


def random_profile(rng, owner, features, n):
    items = rng.choice(sorted(features), size=n, replace=False)
    return RatingProfile(owner, {int(i): int(rng.integers(1, 6)) for i in items})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---- acceptance reporting ----------------------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    n, title = mark.args
    if report.when == "setup" and report.passed:
        return
    detail = dict(item.user_properties).get("detail", "")
    status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    _CRITERIA[n] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        line = f"criterion {n:>2} {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
