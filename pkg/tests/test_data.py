import numpy as np
import pytest

from earlywarn import data
from earlywarn.data import IngestionError, TimeSeriesDataset


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def cycles_fixture(n_cycles=10, rows=40, dt=120.0, D=3, seed=0):
    rng = np.random.default_rng(seed)
    N = n_cycles * rows
    y = np.zeros(N, int)
    y[rows - 1::rows] = 1
    return TimeSeriesDataset(dt * np.arange(1, N + 1), rng.normal(5, 2, (N, D)), y)


# ------------------------------------------------------------------- ingest

def test_load_well_formed(tmp_path):
    ds = data.load_csv(write(tmp_path, "time,y,x1,x2\n0,0,1.0,2.0\n120,0,1.5,2.5\n240,1,2.0,3.0\n"))
    assert ds.n_rows == 3 and ds.n_features == 2
    assert ds.feature_names == ["x1", "x2"]
    np.testing.assert_array_equal(ds.labels, [0, 0, 1])


def test_load_without_labels(tmp_path):
    ds = data.load_csv(write(tmp_path, "time,x1\n0,1\n1,2\n"))
    assert ds.labels is None and ds.n_features == 1


def test_load_sorts_out_of_order_rows(tmp_path):
    ds = data.load_csv(write(tmp_path, "time,x1\n240,3\n0,1\n120,2\n"))
    np.testing.assert_array_equal(ds.timestamps, [0, 120, 240])
    np.testing.assert_array_equal(ds.features[:, 0], [1, 2, 3])
    assert ds.reorder_count > 0


def test_nan_cell_is_missing_then_interpolated(tmp_path):
    ds = data.load_csv(write(tmp_path, "time,x1,x2\n0,2.0,1\n120,NaN,2\n240,4.0,4\n360,bad,3\n"))
    assert ds.missing[1, 0] and ds.missing[3, 0]
    pre = data.preprocess(ds, restart_exclusion=0, fit_rows=np.arange(4))
    raw = pre.features * pre.standardization[:, 1] + pre.standardization[:, 0]
    assert raw[1, 0] == pytest.approx(3.0, abs=1e-12)
    assert raw[3, 0] == pytest.approx(4.0, abs=1e-12)     # trailing gap: nearest value


@pytest.mark.parametrize("text, match", [
    ("x1,x2\n1,2\n", "missing 'time'"),
    ("time,x1\n0,1\n0,2\n", "duplicate timestamps at lines \\[3\\]"),
    ("time,x1\n0,1\n1\n", ":3:"),
    ("time,x1\nabc,1\n", ":2:"),
    ("", "empty"),
])
def test_ingestion_errors(tmp_path, text, match):
    with pytest.raises(IngestionError, match=match):
        data.load_csv(write(tmp_path, text))


def test_unreadable_file(tmp_path):
    with pytest.raises(IngestionError):
        data.load_csv(tmp_path / "nope.csv")


def test_csv_roundtrip(tmp_path):
    ds = cycles_fixture(n_cycles=2, rows=5)
    data.save_csv(ds, tmp_path / "r.csv")
    back = data.load_csv(tmp_path / "r.csv")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "time,y,x1,x2,x3"


# --------------------------------------------------------------- preprocess

def test_standardized_on_non_excluded_rows():
    ds = cycles_fixture()
    pre = data.preprocess(ds, restart_exclusion=1800, fit_rows=np.arange(ds.n_rows))
    keep = ~pre.exclusion_mask
    assert np.all(np.abs(pre.features[keep].mean(axis=0)) < 1e-9)
    assert np.all(np.abs(pre.features[keep].std(axis=0) - 1) < 1e-9)


def test_thirty_minute_exclusion_masks_fifteen_rows():
    ds = cycles_fixture(n_cycles=2, rows=40)
    excl = data.exclusion_after_breaks(ds.timestamps, ds.labels, 1800)
    assert excl.sum() == 15
    assert np.array_equal(np.flatnonzero(excl), np.arange(40, 55))


def test_masked_rows_never_reach_statistics():
    ds = cycles_fixture()
    pre = data.preprocess(ds, 1800)
    poisoned = ds.features.copy()
    excl = pre.exclusion_mask
    poisoned[excl] = 1e9
    # test cycles are outside the default fit rows, so poison them too
    poisoned[6 * 40:] = -1e9
    pre2 = data.preprocess(TimeSeriesDataset(ds.timestamps, poisoned, ds.labels), 1800)
    np.testing.assert_array_equal(pre.standardization, pre2.standardization)


def test_zero_variance_feature_dropped(caplog):
    ds = cycles_fixture(n_cycles=5)
    ds.features[:, 1] = 7.0
    pre = data.preprocess(ds, 1800)
    assert pre.feature_names == ["x1", "x3"]
    assert pre.dropped_features == ["x2"]
    assert "zero-variance" in caplog.text


def test_apply_standardization_reuses_statistics():
    ds = cycles_fixture()
    pre = data.preprocess(ds, 1800)
    again = data.apply_standardization(ds, pre.feature_names, pre.standardization, 1800)
    np.testing.assert_allclose(again.features, pre.features, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(again.exclusion_mask, pre.exclusion_mask)
    with pytest.raises(IngestionError):
        data.apply_standardization(ds, ["x1", "x9"], pre.standardization[:2])


# -------------------------------------------------------------------- split

def test_split_counts_examples():
    assert data.split_counts(10) == (6, 2, 2)
    assert data.split_counts(124) == (74, 25, 25)


def test_split_respects_cycle_boundaries():
    ds = data.preprocess(cycles_fixture(n_cycles=10), 1800)
    tr, va, te = data.split(ds)
    assert [len(p.cycles()) for p in (tr, va, te)] == [6, 2, 2]
    assert tr.timestamps[-1] < va.timestamps[0] < te.timestamps[0]
    # every part ends on a breakdown row
    assert tr.labels[-1] == va.labels[-1] == te.labels[-1] == 1
    with pytest.raises(ValueError):
        data.split(data.preprocess(cycles_fixture(n_cycles=4), 1800))
