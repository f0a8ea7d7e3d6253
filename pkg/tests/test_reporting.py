import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opramsey.errors import EncodingError
from opramsey.reporting import RunManifest, canonical_json, config_hash, emit_report, to_plain, write_atomic

json_scalars = st.one_of(
    st.none(), st.booleans(), st.integers(-10**6, 10**6), st.text(max_size=8),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
)
payloads = st.recursive(
    json_scalars,
    lambda inner: st.one_of(st.lists(inner, max_size=4), st.dictionaries(st.text(max_size=5), inner, max_size=4)),
    max_leaves=12,
)

MANIFEST = RunManifest("test", "0" * 16, 0, "0.1.0", 1, ["test"])


@given(payloads)
def test_canonical_json_is_idempotent(payload):
    text = canonical_json(payload)
    assert canonical_json(json.loads(text)) == text


def test_key_order_does_not_matter():
    assert canonical_json({"b": 1, "a": [1.5, 2]}) == canonical_json({"a": [1.5, 2], "b": 1})
    assert canonical_json({}) == "{}"
    assert config_hash({"b": 1, "a": 2}) == config_hash({"a": 2, "b": 1})
    assert len(config_hash({"a": 1})) == 16


def test_numpy_and_special_values():
    plain = to_plain({"z": np.complex128(1 + 2j), "v": np.arange(2), "bad": float("nan"), "inf": -math.inf})
    assert plain["z"] == [1.0, 2.0]
    assert plain["v"] == [0, 1]
    assert plain["bad"] == "nan" and plain["inf"] == "-inf"
    with pytest.raises(EncodingError):
        to_plain(object())


def test_json_report_envelope():
    data = emit_report({"count": 3}, "json", MANIFEST)
    rep = json.loads(data)
    assert rep["payload"] == {"count": 3}
    assert rep["manifest"]["command"] == "test"


def test_csv_report_shapes():
    lines = emit_report(np.eye(2), "csv", MANIFEST).decode().strip().splitlines()
    assert lines[0].startswith("# manifest ")
    assert lines[1] == "row,col,re,im"
    assert len(lines) == 2 + 4
    kv = emit_report({"a": 1, "b": 2.5}, "csv", MANIFEST).decode().strip().splitlines()
    assert kv[1] == "key,value" and kv[2].startswith("a,")


def test_write_atomic(tmp_path):
    target = tmp_path / "out.json"
    write_atomic(b"hello\n", str(target))
    assert target.read_text() == "hello\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]
