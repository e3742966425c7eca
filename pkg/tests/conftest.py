import json
from pathlib import Path

import numpy as np
import pytest

from nmode import _backend

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def tables():
    return json.loads((DATA / "reference_tables.json").read_text())


@pytest.fixture(scope="session")
def oracle():
    return json.loads((DATA / "oracle_values.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _backends():
    out = [pytest.param(_backend._kernels_py, id="python")]
    try:
        from nmode import _kernels
        out.append(pytest.param(_kernels, id="compiled"))
    except ImportError:
        out.append(pytest.param(None, id="compiled", marks=pytest.mark.skip(reason="extension not built")))
    return out


@pytest.fixture(params=_backends())
def kern(request):
    """Each available kernel implementation in turn."""
    return request.param


def expand_row(blocks, sites, row):
    """Table row (values at the listed sites, then Omega) to a full occupation vector."""
    q = np.empty(sum(len(b) for b in blocks))
    for s, v in zip(sites, row[:-1]):
        blk = next(b for b in blocks if s in b)
        q[list(blk)] = v
    return q, row[-1]


# acceptance summary: one line per criterion, plus side-by-side notes
ACCEPTANCE: dict[int, str] = {}
ACCEPTANCE_NOTES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        tr.write_line(ACCEPTANCE[k])
    if ACCEPTANCE_NOTES:
        tr.write_line("")
        for note in ACCEPTANCE_NOTES:
            tr.write_line(note)
