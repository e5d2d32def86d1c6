import json

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from giverscheme.io import read_csv, sha256_file, to_json_text, write_csv, write_json


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=50))
@settings(max_examples=50, deadline=None)
def test_csv_float_roundtrip_is_exact(tmp_path_factory, values):
    path = write_csv(tmp_path_factory.mktemp("csv") / "x.csv",
                     {"v": np.array(values), "flag": np.array(values) > 0})
    cols = read_csv(path)
    assert [float(v) for v in cols["v"]] == values
    assert set(cols["flag"]) <= {"0", "1"}


def test_csv_quoting_and_lengths(tmp_path):
    path = write_csv(tmp_path / "q.csv", {"name": ["a,b", 'say "hi"']})
    assert read_csv(path)["name"] == ["a,b", 'say "hi"']
    try:
        write_csv(tmp_path / "bad.csv", {"a": [1], "b": [1, 2]})
    except ValueError:
        pass
    else:
        raise AssertionError("unequal columns accepted")


def test_json_numpy_types(tmp_path):
    doc = {"a": np.arange(3), "b": np.float64(0.5), "c": 1 + 2j, "d": np.bool_(True)}
    assert json.loads(to_json_text(doc)) == {"a": [0, 1, 2], "b": 0.5, "c": [1.0, 2.0], "d": True}
    assert write_json(tmp_path / "d" / "x.json", doc).exists()


def test_sha256(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"abc")
    assert sha256_file(path) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
