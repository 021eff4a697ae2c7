from pathlib import Path

import pytest

from greenjump.ingest import ExportRecord, GreenProductList, build_export_tensor

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"

# Fixture F1: A exports p1, p2; B exports p2, p3; C exports p3, p4; all 10 each.
# Fixture F2 adds a later year where A newly exports p4 (RCA 3) and C moves into p2.
P1, P2, P3, P4 = "000001", "000002", "000003", "000004"
A, B, C = "AAA", "BBB", "CCC"

F1_ROWS = [(A, P1, 10), (A, P2, 10), (B, P2, 10), (B, P3, 10), (C, P3, 10), (C, P4, 10)]
F2_ROWS = [(A, P1, 10), (A, P4, 10), (B, P2, 10), (B, P3, 10), (C, P2, 10), (C, P3, 10)]


@pytest.fixture
def f1_tensor():
    return build_export_tensor([ExportRecord(2007, c, p, v) for c, p, v in F1_ROWS])


@pytest.fixture
def f2_tensor():
    recs = [ExportRecord(2007, c, p, v) for c, p, v in F1_ROWS]
    recs += [ExportRecord(2017, c, p, v) for c, p, v in F2_ROWS]
    return build_export_tensor(recs)


@pytest.fixture
def green_p2_p4():
    return GreenProductList(frozenset({P2, P4}))


@pytest.fixture
def small_fixture():
    return FIXTURES / "small"


@pytest.fixture
def synthetic_fixture():
    return FIXTURES / "synthetic"


# criterion number -> (passed, detail), filled in by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
