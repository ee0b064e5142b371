import numpy as np
import pytest

from ratingxva.presets import P1, P2, P3
from ratingxva.rating_model import TransitionMatrix, generator_from_annual_matrix


@pytest.fixture(scope="session")
def generators():
    return tuple(generator_from_annual_matrix(TransitionMatrix(p)) for p in (P1, P2, P3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None and (rep.when == "call" or rep.failed or rep.skipped):
        number, title = mark.args
        ok, names, _ = item.config.stash[_VERDICTS].get(number, (True, [], title))
        if not rep.passed:
            ok = False
            names = names + [f"{item.name}: {'skipped' if rep.skipped else 'failed'}"]
        item.config.stash[_VERDICTS][number] = (ok, names, title)
    return rep


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(_VERDICTS, {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        ok, names, title = verdicts[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
        for n in names:
            terminalreporter.write_line(f"    {n}")
