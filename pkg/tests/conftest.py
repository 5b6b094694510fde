import numpy as np
import pytest

from flytes import _backend
from flytes.formats import TABLE_ORDER

FORMAT_NAMES = [f.name for f in TABLE_ORDER]
NARROW_FORMATS = [f.name for f in TABLE_ORDER if f.shift]


@pytest.fixture(params=_backend.available())
def backend(request):
    with _backend.use_backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def uint_for(fmt):
    return np.uint32 if fmt.parent_bits == 32 else np.uint64


def random_patterns(rng, fmt, n):
    """Uniform random parent bit patterns (all classes appear)."""
    u = uint_for(fmt)
    return rng.integers(0, 1 << fmt.parent_bits, size=n, dtype=np.uint64).astype(u)


def finite_mask(bits, fmt):
    p = fmt.parent
    exp = (bits.astype(np.uint64) >> np.uint64(p.mantissa_bits)) & np.uint64(p.max_exponent_field)
    return exp != np.uint64(p.max_exponent_field)


# Acceptance criteria: tests marked ``criterion(n, title)`` get a one-line
# PASS/FAIL summary at the end of the run.
_verdicts: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, title = mark.args
    entry = _verdicts.setdefault(n, [title, True])
    if rep.failed:
        entry[1] = False


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_verdicts):
        title, ok = _verdicts[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")
