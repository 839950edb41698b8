import functools

import numpy as np
import pytest

from artifact.families import disk_surface, parallel_beam
from artifact.geometry import build_adapted_frame, solve_tangency
from artifact.presets import build, preset


@functools.lru_cache(maxsize=None)
def _built(name):
    return build(preset(name))


@pytest.fixture(scope="session")
def built():
    return _built


@pytest.fixture(scope="session")
def unit_disk_frame():
    fam = parallel_beam()
    surf = disk_surface((0.0, 0.0), 1.0)
    pair = solve_tangency(fam, surf, (np.array([0.05]), np.array([0.97, 0.02])))
    return build_adapted_frame(fam, surf, pair)


_RESULTS = {}


@pytest.fixture(scope="session")
def record():
    def _record(criterion, ok, detail):
        _RESULTS[criterion] = (bool(ok), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        ok, detail = _RESULTS[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k:>2}: {detail}")
