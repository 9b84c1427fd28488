import numpy as np
import pytest

from dacr.card7 import Committee
from dacr.commitment import TransparentPCS
from dacr.coding import F65537


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def com7():
    return Committee.make(7, 2, d=4, pcs=TransparentPCS(F65537, 4), seed=3)


# acceptance criteria report: one line per criterion at the end of the run
CRITERIA: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
