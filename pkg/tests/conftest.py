from __future__ import annotations

import pytest

from gmcantor.embedding import CHECKED, STRICT, build_atlas
from gmcantor.gmtower import odometer_tower

_OUTCOMES: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item: pytest.Item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    failed = rep.failed
    if rep.when == "call" or failed:
        prev = _OUTCOMES.get(n)
        status = "FAIL" if failed or (prev and prev[0] == "FAIL") else "PASS"
        elapsed = rep.duration + (prev[2] if prev else 0.0)
        _OUTCOMES[n] = (status, title, elapsed)


def pytest_terminal_summary(terminalreporter) -> None:
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        status, title, elapsed = _OUTCOMES[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}  ({elapsed:.2f} s)")


@pytest.fixture(scope="session")
def odo29():
    return odometer_tower([2, 9])


@pytest.fixture(scope="session")
def odo2973():
    return odometer_tower([2, 9, 73])


@pytest.fixture(scope="session")
def atlas29(odo29):
    return build_atlas(odo29, 1, STRICT)


@pytest.fixture(scope="session")
def atlas2973(odo2973):
    return build_atlas(odo2973, 2, STRICT)


@pytest.fixture(scope="session")
def relaxed_atlas():
    """Checked-mode atlas on a tower that breaks the growth condition above level 2."""
    return build_atlas(odometer_tower([2, 9, 2, 2, 2]), 4, CHECKED)
