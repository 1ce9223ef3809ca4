import numpy as np
import pytest

from simplicial_percolation import two_point_config

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


class ScriptedRng:
    """Stands in for a Generator whose ``random`` returns preset uniforms row by row."""

    def __init__(self, rows):
        self._rows = np.atleast_2d(np.asarray(rows, dtype=float))
        self._pos = 0

    def random(self, size):
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        flat = self._rows.ravel()[self._pos : self._pos + n]
        self._pos += n
        return flat.reshape(shape)


@pytest.fixture
def scripted_rng():
    return ScriptedRng


@pytest.fixture
def half_half():
    """Two-point weights {0.5, 1} with equal mass, sum fitness, variant B, d=3."""
    return two_point_config(0.5, 0.5)


@pytest.fixture
def acceptance(request):
    """Record one line per acceptance criterion; the test still asserts on its own."""

    def record(label: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[label] = (bool(passed), detail)
        return passed

    return record


def pytest_runtest_makereport(item, call):
    if call.when != "call" or "test_acceptance" not in item.nodeid:
        return
    label = getattr(item.function, "criterion", None)
    if label and call.excinfo is not None and label not in _ACCEPTANCE:
        _ACCEPTANCE[label] = (False, f"raised {call.excinfo.typename}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0])):
        ok, detail = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
