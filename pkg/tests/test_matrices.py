import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from greenjump.errors import DataError
from greenjump.ingest import ExportRecord, build_export_tensor
from greenjump.matrices import (
    CompetitivenessMatrix,
    RcaMatrix,
    binarize,
    compute_proximity,
    compute_rca,
    write_proximity_csv,
    write_rca_csv,
)

from conftest import A, C, P1, P2, P3, P4
from oracles import proximity_oracle, rca_oracle


def test_f1_rca(f1_tensor):
    rca = compute_rca(f1_tensor, 2007)
    assert rca.get(A, P1) == pytest.approx(3.0, abs=1e-12)
    assert rca.get(A, P2) == pytest.approx(1.5, abs=1e-12)
    assert rca.get(C, P4) == pytest.approx(3.0, abs=1e-12)
    assert rca.get(A, P3) == 0.0


def test_f1_rca_matches_oracle(f1_tensor):
    rca = compute_rca(f1_tensor, 2007)
    x = [[int(v) for v in row] for row in f1_tensor.matrix(2007)]
    ref = rca_oracle(x)
    for (ci, pi), v in ref.items():
        assert rca.values[ci, pi] == float(v)


def test_single_country_single_product():
    t = build_export_tensor([ExportRecord(2007, "AAA", "000001", 12345)])
    assert compute_rca(t, 2007).get("AAA", "000001") == 1.0


def test_rca_exact_for_large_values():
    # X_cp * world overflows int64; must still be the correctly rounded ratio
    recs = [ExportRecord(2007, "AAA", "000001", 3 * 10**12), ExportRecord(2007, "AAA", "000002", 10**12),
            ExportRecord(2007, "BBB", "000001", 10**12), ExportRecord(2007, "BBB", "000002", 7 * 10**12)]
    rca = compute_rca(build_export_tensor(recs), 2007)
    x = [[3 * 10**12, 10**12], [10**12, 7 * 10**12]]
    ref = rca_oracle(x)
    for (ci, pi), v in ref.items():
        assert rca.values[ci, pi] == float(v)


def test_zero_total_country_excluded(caplog):
    t = build_export_tensor([ExportRecord(2007, "AAA", "000001", 5), ExportRecord(2007, "BBB", "000001", 0)])
    rca = compute_rca(t, 2007)
    assert rca.countries == ("AAA",) and rca.excluded == ("BBB",)
    assert "BBB" in caplog.text


def test_missing_year_is_fatal(f1_tensor):
    with pytest.raises(DataError, match="2017"):
        compute_rca(f1_tensor, 2017)


def test_zero_world_is_fatal():
    t = build_export_tensor([ExportRecord(2007, "AAA", "000001", 0)])
    with pytest.raises(DataError):
        compute_rca(t, 2007)


def test_binarize_strict(f1_tensor):
    m = binarize(compute_rca(f1_tensor, 2007))
    assert m.get(A, P1) == 1
    assert m.get(A, P3) == 0
    one = RcaMatrix(2007, ("AAA",), ("000001", "000002"), np.array([[1.0, 0.0]]))
    assert binarize(one).entries.tolist() == [[False, False]]
    assert binarize(one, inclusive=True).entries.tolist() == [[True, False]]
    with pytest.raises(ValueError):
        binarize(one, 0.0)


def test_f1_proximity(f1_tensor):
    phi = compute_proximity(binarize(compute_rca(f1_tensor, 2007)))
    assert phi.get(P1, P2) == 0.5
    assert phi.get(P2, P3) == 0.5
    assert phi.get(P3, P4) == 0.5
    assert phi.get(P1, P3) == 0.0
    assert phi.get(P1, P4) == 0.0
    assert phi.get(P2, P4) == 0.0
    assert all(phi.get(p, p) == 1.0 for p in (P1, P2, P3, P4))


def test_product_without_exporter_has_zero_proximity():
    m = CompetitivenessMatrix(2007, ("AAA", "BBB"), ("000001", "000002"), np.array([[1, 0], [1, 0]], dtype=bool))
    phi = compute_proximity(m)
    assert phi.values.tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_empty_competitiveness_is_fatal():
    with pytest.raises(DataError):
        compute_proximity(CompetitivenessMatrix(2007, (), (), np.zeros((0, 0), dtype=bool)))


def _cm(entries):
    entries = np.asarray(entries, dtype=bool)
    n_c, n_p = entries.shape
    return CompetitivenessMatrix(2007, tuple(f"C{k:02d}"[:3] for k in range(n_c)),
                                 tuple(f"{k:06d}" for k in range(n_p)), entries)


bool_mats = st.tuples(st.integers(1, 8), st.integers(1, 8)).flatmap(
    lambda s: arrays(bool, s))


@settings(max_examples=200, deadline=None)
@given(bool_mats)
def test_proximity_matches_triple_loop(entries):
    phi = compute_proximity(_cm(entries))
    ref = np.array(proximity_oracle(entries.astype(int).tolist()))
    assert np.array_equal(phi.values, ref)
    assert np.array_equal(phi.values, phi.values.T)
    assert np.all((phi.values >= 0) & (phi.values <= 1))


@settings(max_examples=100, deadline=None)
@given(bool_mats, st.data())
def test_adding_co_exporter_never_lowers_proximity(entries, data):
    n_p = entries.shape[1]
    i = data.draw(st.integers(0, n_p - 1))
    j = data.draw(st.integers(0, n_p - 1))
    extra = np.zeros((1, n_p), dtype=bool)
    extra[0, [i, j]] = True
    before = np.array(proximity_oracle(entries.astype(int).tolist()))
    grown = np.vstack([entries, extra])
    after = compute_proximity(_cm(grown)).values
    # (N_ij + 1) / (max(N_i, N_j) + 1) >= N_ij / max(N_i, N_j) since N_ij <= max
    assert after[i, j] >= before[i, j]
    assert after[i, j] > 0
    assert np.array_equal(after, np.array(proximity_oracle(grown.astype(int).tolist())))


rca_tensors = st.tuples(st.integers(1, 8), st.integers(1, 8)).flatmap(
    lambda s: arrays(np.int64, s, elements=st.integers(0, 10**9)))


@settings(max_examples=100, deadline=None)
@given(rca_tensors)
def test_rca_matches_share_ratio_oracle(x):
    if x.sum() == 0:
        x[0, 0] = 1
    recs = [ExportRecord(2007, "Q" + chr(65 + ci) * 2, f"{pi:06d}", int(x[ci, pi]))
            for ci in range(x.shape[0]) for pi in range(x.shape[1])]
    t = build_export_tensor(recs)
    rca = compute_rca(t, 2007)
    ref = rca_oracle(x.tolist())
    rows = [ci for ci in range(x.shape[0]) if x[ci].sum() > 0]
    assert len(rows) == len(rca.countries)
    for k, ci in enumerate(rows):
        for pi in range(x.shape[1]):
            assert rca.values[k, pi] == pytest.approx(float(ref[ci, pi]), rel=1e-12, abs=0)


@settings(max_examples=50, deadline=None)
@given(rca_tensors)
def test_balassa_identity(x):
    """Export shares sum to one and RCA is share over world share."""
    if x.sum() == 0:
        x[0, 0] = 1
    recs = [ExportRecord(2007, "Q" + chr(65 + ci) + "Z", f"{pi:06d}", int(x[ci, pi]))
            for ci in range(x.shape[0]) for pi in range(x.shape[1])]
    rca = compute_rca(build_export_tensor(recs), 2007)
    world_share = x.sum(axis=0) / x.sum()
    for k, c in enumerate(rca.countries):
        ci = ord(c[1]) - 65
        share = x[ci] / x[ci].sum()
        assert share.sum() == pytest.approx(1.0, rel=1e-12)
        expect = np.divide(share, world_share, out=np.zeros_like(share), where=world_share > 0)
        np.testing.assert_allclose(rca.values[k], expect, rtol=1e-12)


def test_dumps(tmp_path, f1_tensor):
    rca = compute_rca(f1_tensor, 2007)
    rows = list(csv.reader(write_rca_csv(rca, tmp_path / "rca.csv").open()))
    assert rows[0] == ["country", "product", "rca"]
    assert rows[1:] == sorted(rows[1:])
    assert rows[1] == ["AAA", P1, "3.0"]
    phi = compute_proximity(binarize(rca))
    rows = list(csv.reader(write_proximity_csv(phi, tmp_path / "phi.csv").open()))
    assert rows == [["product_i", "product_j", "phi"], [P1, P2, "0.5"], [P2, P3, "0.5"], [P3, P4, "0.5"]]
