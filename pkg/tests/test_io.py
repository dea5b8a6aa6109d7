import numpy as np
from hypothesis import given, strategies as st

from hystrol.io import dumps_json, load_checkpoint, read_csv, save_checkpoint, write_csv


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30))
def test_csv_round_trip_is_lossless(values):
    import tempfile, os
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "x.csv")
        write_csv(path, ["a", "b"], [values, values[::-1]])
        header, data = read_csv(path)
    assert header == ["a", "b"]
    np.testing.assert_array_equal(data[:, 0], values)
    np.testing.assert_array_equal(data[:, 1], values[::-1])


def test_json_is_sorted_and_strict():
    text = dumps_json({"b": np.float64(np.nan), "a": [np.int64(1), np.bool_(True)], "c": np.arange(2)})
    assert text == '{\n  "a": [\n    1,\n    true\n  ],\n  "b": null,\n  "c": [\n    0,\n    1\n  ]\n}\n'


def test_checkpoint_round_trip(tmp_path):
    u = np.random.default_rng(0).normal(size=(5, 2, 3))
    save_checkpoint(tmp_path / "c.npz", control=u, t=np.linspace(0, 1, 5))
    back = load_checkpoint(tmp_path / "c.npz")
    np.testing.assert_array_equal(back["control"], u)
