import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from landcover.data_model import (DataError, Dataset, RasterCube, Sample, load_raster,
                                  load_samples, save_raster, save_samples, split_random)

from conftest import write_csv


def test_load_small_file(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("f1,f2,label\n0.5,1.0,0\n2,3,1\r\n-1,4.25,1\n")
    ds = load_samples(p)
    assert (len(ds), ds.dim, ds.n_classes) == (3, 2, 2)
    assert ds.features[2, 1] == 4.25
    assert ds.class_names == {0: "class_0", 1: "class_1"}


def test_short_row_names_line(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("f1,f2,label\n1,2,0\n3,1\n")
    with pytest.raises(DataError, match=r"s\.csv:3"):
        load_samples(p)


@pytest.mark.parametrize("body, needle", [
    ("", "empty"),
    ("f1,label\nabc,0\n", ":2"),
    ("f1,label\n1,x\n", ":2"),
    ("f1,label\nnan,0\n", ":2"),
])
def test_malformed_files(tmp_path, body, needle):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(DataError, match=needle):
        load_samples(p)


def test_missing_file_named(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        load_samples(tmp_path / "nope.csv")


def test_large_training_file(tmp_path):
    r = np.random.default_rng(0)
    X = r.normal(size=(2700, 3))
    y = np.arange(2700) % 7
    ds = load_samples(write_csv(tmp_path / "big.csv", X, y))
    assert len(ds) == 2700 and ds.n_classes == 7


def test_save_load_roundtrip(tmp_path, blobs):
    save_samples(blobs, tmp_path / "b.csv")
    back = load_samples(tmp_path / "b.csv")
    np.testing.assert_array_equal(back.features, blobs.features)
    np.testing.assert_array_equal(back.labels, blobs.labels)


def test_sample_and_dataset_invariants():
    with pytest.raises(DataError):
        Sample(np.array([]), 0)
    with pytest.raises(DataError):
        Sample(np.array([np.inf]), 0)
    ds = Dataset.from_samples([Sample(np.array([1.0]), 0), Sample(np.array([2.0]), 1)])
    assert ds.samples[1].label == 1
    named = Dataset(np.ones((2, 1)), np.array([0, 1]), {0: "water"})
    assert named.class_names == {0: "water", 1: "class_1"}
    with pytest.raises(DataError):
        Dataset(np.ones((2, 1)), np.array([0, -1]))
    with pytest.raises(DataError):
        Dataset(np.ones((2, 2)), np.array([0]))


def test_split_example():
    X = np.arange(200, dtype=float)[:, None]
    ds = Dataset(X, np.repeat([0, 1], 100))
    tr, te = split_random(ds, 0.5, seed=7)
    assert list(tr.class_counts()) == [50, 50] and list(te.class_counts()) == [50, 50]
    assert not set(tr.features[:, 0]) & set(te.features[:, 0])
    tr2, te2 = split_random(ds, 0.5, seed=7)
    np.testing.assert_array_equal(tr.features, tr2.features)
    np.testing.assert_array_equal(te.features, te2.features)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_fraction_bounds(fraction):
    ds = Dataset(np.arange(4.0)[:, None], np.array([0, 0, 1, 1]))
    with pytest.raises(DataError):
        split_random(ds, fraction, 0)


def test_split_singleton_class_named():
    ds = Dataset(np.arange(3.0)[:, None], np.array([0, 0, 1]), {0: "water", 1: "urban"})
    with pytest.raises(DataError, match="urban"):
        split_random(ds, 0.5, 0)


@given(counts=st.lists(st.integers(2, 40), min_size=1, max_size=5),
       fraction=st.floats(0.05, 0.95), seed=st.integers(0, 2**31))
def test_split_is_stratified_partition(counts, fraction, seed):
    y = np.concatenate([np.full(c, k) for k, c in enumerate(counts)])
    ds = Dataset(np.arange(y.size, dtype=float)[:, None], y)
    tr, te = split_random(ds, fraction, seed)
    a, b = set(tr.features[:, 0]), set(te.features[:, 0])
    assert len(tr) + len(te) == len(ds) and not a & b and a | b == set(range(y.size))
    for k, c in enumerate(counts):
        assert abs(tr.class_counts()[k] - fraction * c) <= 1.0


def test_raster_example(tmp_path):
    cube = RasterCube(np.ones((1, 4, 4), dtype=np.float32))
    save_raster(cube, tmp_path / "c.tcr")
    blob = (tmp_path / "c.tcr").read_bytes()
    assert blob.startswith(b"TCRASTER 4 4 1\n") and len(blob.split(b"\n", 1)[1]) == 16 * 4
    back = load_raster(tmp_path / "c.tcr")
    np.testing.assert_array_equal(back.data, cube.data)


def test_raster_size_mismatch(tmp_path):
    p = tmp_path / "bad.tcr"
    p.write_bytes(b"TCRASTER 2 2 2\n" + np.zeros(4, "<f4").tobytes())
    with pytest.raises(DataError, match="bytes"):
        load_raster(p)


def test_raster_nonfinite_names_pixel():
    data = np.zeros((2, 3, 3), dtype=np.float32)
    data[1, 2, 0] = np.nan
    with pytest.raises(DataError, match="band 1.*row 2.*col 0"):
        RasterCube(data)


def test_raster_many_bands(tmp_path):
    cube = RasterCube(np.random.default_rng(0).random((65, 3, 2)).astype(np.float32))
    save_raster(cube, tmp_path / "h.tcr")
    back = load_raster(tmp_path / "h.tcr")
    assert back.bands == 65 and back.pixels().shape == (6, 65)
    np.testing.assert_array_equal(back.pixels()[4], cube.data[:, 2, 0])


@given(arrays(np.float32, st.tuples(st.integers(1, 3), st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(-1e6, 1e6, width=32)))
def test_raster_roundtrip_lossless(tmp_path_factory, data):
    p = tmp_path_factory.mktemp("r") / "x.tcr"
    save_raster(RasterCube(data), p)
    assert load_raster(p).data.tobytes() == data.tobytes()
