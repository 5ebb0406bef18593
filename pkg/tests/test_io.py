import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlrcrit.exceptions import InvalidInputError, ValidationError
from dlrcrit.io import (RunRecord, digest, parse_geometry, parse_materials, read_trace_csv,
                        serialize_geometry, serialize_materials, write_trace_csv)
from dlrcrit.problems import synthetic_library
from dlrcrit.trace import IterationTrace, TraceRecord


def one_group():
    return {"groups": 1, "chi": [1.0],
            "materials": [{"name": "fuel", "D": [1.2], "sigma_t": [0.5],
                           "nu_sigma_f": [0.3], "sigma_s": [[0.2]]}]}


def write(tmp_path, data, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def test_one_group_round_trip(tmp_path):
    lib = parse_materials(write(tmp_path, one_group()))
    assert lib.group_count == 1 and lib.materials[0].name == "fuel"
    out = tmp_path / "out.json"
    serialize_materials(lib, out)
    assert parse_materials(out) == lib


def test_synthetic_library_round_trip(tmp_path):
    lib = synthetic_library(12, 3, 7)
    text = serialize_materials(lib, tmp_path / "lib.json")
    again = parse_materials(tmp_path / "lib.json")
    assert again == lib
    assert serialize_materials(again) == text


def test_chi_normalization_is_reported(tmp_path):
    data = one_group()
    data["chi"] = [0.9]
    with pytest.raises(ValidationError, match="chi normalization"):
        parse_materials(write(tmp_path, data))


@pytest.mark.parametrize("edit, where", [
    (lambda d: d["materials"][0].pop("D"), "$.materials[0].D"),
    (lambda d: d["materials"][0].update(sigma_s=[0.2]), "$.materials[0].sigma_s"),
    (lambda d: d.update(groups="one"), "$.groups"),
    (lambda d: d["materials"][0].update(sigma_t=["x"]), "$.materials[0].sigma_t"),
    (lambda d: d.update(materials=[]), "$.materials"),
])
def test_field_paths_in_errors(tmp_path, edit, where):
    data = one_group()
    edit(data)
    with pytest.raises(ValidationError) as exc:
        parse_materials(write(tmp_path, data))
    assert where in str(exc.value)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(InvalidInputError, match="not found"):
        parse_materials(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InvalidInputError, match="not valid JSON"):
        parse_materials(bad)


def test_extra_keys_are_returned(tmp_path):
    data = one_group()
    data["radius"] = 6.4
    _, extra = parse_materials(write(tmp_path, data), return_extra=True)
    assert extra == {"radius": 6.4}


def test_geometry_names_indices_and_hollow(tmp_path):
    lib = synthetic_library(4, 2, 0)
    name = lib.materials[1].name
    p = write(tmp_path, {"layers": [{"material": None, "thickness": 1.0},
                                    {"material": name, "thickness": 2.5},
                                    {"material": 0, "thickness": 3}]}, "g.json")
    geom = parse_geometry(p, lib)
    assert geom.layers == ((None, 1.0), (1, 2.5), (0, 3))
    serialize_geometry(geom, lib, tmp_path / "g2.json")
    assert parse_geometry(tmp_path / "g2.json", lib) == geom
    with pytest.raises(ValidationError, match="unknown material"):
        parse_geometry(write(tmp_path, {"layers": [{"material": "lead", "thickness": 1}]}),
                       lib)
    with pytest.raises(ValidationError, match="library has 2"):
        parse_geometry(write(tmp_path, {"layers": [{"material": 5, "thickness": 1}]}), lib)


def test_digest_is_stable():
    a = {"b": [1, 2.5], "a": "x"}
    assert digest(a) == digest({"a": "x", "b": [1, 2.5]})
    assert digest(a) != digest({"a": "x", "b": [1, 2.5000001]})
    assert len(digest(a)) == 64


def test_run_record_without_wall_time(tmp_path):
    rec = RunRecord("full", {"m": "0"}, {"tol": 1e-9}, {"seed": 0},
                    {"k": 1.1, "delta": math.inf, "v": np.float64(2.0)}, wall_time=3.2)
    text = rec.write(tmp_path / "r.json")
    data = json.loads(text)
    assert "wall_time" not in data and data["result"]["delta"] == "inf"
    assert json.loads(rec.write(tmp_path / "r.json", include_wall_time=True))["wall_time"] == 3.2
    assert RunRecord.read(tmp_path / "r.json").method == "full"


finite = st.floats(allow_nan=False, allow_infinity=True, width=64)
record = st.builds(TraceRecord, st.integers(0, 10**6), finite, finite,
                   st.integers(1, 200), finite, st.integers(0, 10**9))


@settings(max_examples=40, deadline=None)
@given(st.lists(record, max_size=12))
def test_trace_csv_is_lossless(tmp_path_factory, rows):
    p = tmp_path_factory.mktemp("csv") / "trace.csv"
    trace = IterationTrace(rows)
    write_trace_csv(trace, p)
    assert read_trace_csv(p) == trace


def test_trace_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(InvalidInputError, match="expected header"):
        read_trace_csv(p)
