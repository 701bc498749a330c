import re

import numpy as np
import pytest

from assetembed.data import AssetMeta, ReturnsMatrix
from assetembed.synthetic import business_days

_acceptance = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    name = marker.args[0] if marker.args else item.name
    if call.excinfo is None:
        status = "PASS"
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        status = "SKIP"
    else:
        status = "FAIL"
    notes = "; ".join(v for k, v in item.user_properties if k == "note")
    _acceptance[name] = f"{status}  {name}" + (f"  [{notes}]" if notes else "")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    key = lambda s: int(re.match(r"AC(\d+)", s).group(1)) if re.match(r"AC\d+", s) else 99
    for name in sorted(_acceptance, key=key):
        terminalreporter.write_line(_acceptance[name])


def make_returns(R, sectors=None, start="2001-01-02"):
    R = np.asarray(R, dtype=float)
    n, T = R.shape
    sectors = sectors or ["X"] * n
    assets = [AssetMeta(i, f"A{i}", sectors[i], "ind") for i in range(n)]
    return ReturnsMatrix(assets, business_days(start, T), R)


@pytest.fixture
def note(request):
    """Attach a measured value to the acceptance summary line."""
    return lambda text: request.node.user_properties.append(("note", text))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
