import json
import struct

import numpy as np
import pytest

from kernsym.errors import (
    BadOffsets,
    MalformedHeader,
    SafetensorsError,
    TruncatedFile,
    UnsupportedDtype,
)
from kernsym.safetensors_io import (
    TensorStore,
    parse_safetensors,
    write_safetensors,
)


def _file(header: dict, payload: bytes) -> bytes:
    hb = json.dumps(header, separators=(",", ":")).encode()
    return struct.pack("<Q", len(hb)) + hb + payload


def test_parse_minimal_single_tensor():
    data = np.arange(9, dtype="<f4").tobytes()
    raw = _file({"w": {"dtype": "F32", "shape": [1, 1, 3, 3], "data_offsets": [0, 36]}}, data)
    store = parse_safetensors(raw)
    assert store.names() == ["w"]
    arr = store.to_array("w")
    assert arr.shape == (1, 1, 3, 3)
    assert arr.dtype == np.float64
    assert np.array_equal(arr.ravel(), np.arange(9.0))


def test_round_trip_identity():
    rng = np.random.default_rng(0)
    store = TensorStore(metadata={"origin": "unit-test"})
    store.add("a.weight", rng.normal(size=(2, 3, 3, 3)).astype(np.float32))
    store.add("a.bias", rng.normal(size=(2,)), dtype="F64")
    store.add("b.weight", rng.normal(size=(4, 2, 1, 1)), dtype="F64")
    blob = write_safetensors(store)
    again = parse_safetensors(blob)
    assert again == store
    assert write_safetensors(again) == blob  # byte-stable re-serialization


def test_insertion_order_preserved():
    store = TensorStore()
    for name in ("z", "m", "a"):
        store.add(name, np.zeros((1,)), dtype="F64")
    assert parse_safetensors(write_safetensors(store)).names() == ["z", "m", "a"]


def test_empty_store_is_a_valid_file():
    blob = write_safetensors(TensorStore())
    assert blob[8:] == b"{}"
    assert len(parse_safetensors(blob)) == 0


def test_offsets_abut_with_no_gaps():
    store = TensorStore()
    store.add("x", np.ones((2, 2)), dtype="F32")
    store.add("y", np.ones((3,)), dtype="F64")
    blob = write_safetensors(store)
    header = json.loads(blob[8 : 8 + struct.unpack("<Q", blob[:8])[0]])
    assert header["x"]["data_offsets"] == [0, 16]
    assert header["y"]["data_offsets"] == [16, 40]


def test_header_length_beyond_file_is_truncated():
    with pytest.raises(TruncatedFile):
        parse_safetensors(struct.pack("<Q", 1000) + b"{}")


def test_short_prefix_is_truncated():
    with pytest.raises(TruncatedFile):
        parse_safetensors(b"\x02\x00")


def test_invalid_json_header():
    bad = b"{not json"
    with pytest.raises(MalformedHeader):
        parse_safetensors(struct.pack("<Q", len(bad)) + bad)


def test_non_object_header():
    bad = b"[1,2]"
    with pytest.raises(MalformedHeader):
        parse_safetensors(struct.pack("<Q", len(bad)) + bad)


def test_wrong_field_types():
    raw = _file({"w": {"dtype": 3, "shape": [1], "data_offsets": [0, 4]}}, b"\0" * 4)
    with pytest.raises(MalformedHeader):
        parse_safetensors(raw)
    raw = _file({"w": {"dtype": "F32", "shape": "nope", "data_offsets": [0, 4]}}, b"\0" * 4)
    with pytest.raises(MalformedHeader):
        parse_safetensors(raw)


def test_unsupported_dtype():
    raw = _file({"w": {"dtype": "I64", "shape": [1], "data_offsets": [0, 8]}}, b"\0" * 8)
    with pytest.raises(UnsupportedDtype):
        parse_safetensors(raw)


def test_out_of_bounds_offsets():
    raw = _file({"w": {"dtype": "F32", "shape": [2], "data_offsets": [0, 8]}}, b"\0" * 4)
    with pytest.raises(BadOffsets):
        parse_safetensors(raw)


def test_length_mismatch_with_shape():
    raw = _file({"w": {"dtype": "F32", "shape": [3], "data_offsets": [0, 8]}}, b"\0" * 8)
    with pytest.raises(BadOffsets):
        parse_safetensors(raw)


def test_overlapping_tensors_rejected():
    raw = _file(
        {
            "a": {"dtype": "F32", "shape": [2], "data_offsets": [0, 8]},
            "b": {"dtype": "F32", "shape": [2], "data_offsets": [4, 12]},
        },
        b"\0" * 12,
    )
    with pytest.raises(BadOffsets):
        parse_safetensors(raw)


def test_f16_widened_to_f64():
    vals = np.array([0.5, -2.0, 1.5], dtype="<f2")
    raw = _file({"w": {"dtype": "F16", "shape": [3], "data_offsets": [0, 6]}}, vals.tobytes())
    store = parse_safetensors(raw)
    assert store.entry("w").dtype == "F64"
    assert np.array_equal(store.to_array("w"), np.array([0.5, -2.0, 1.5]))


def test_metadata_preserved_through_round_trip():
    raw = _file(
        {
            "__metadata__": {"format": "pt"},
            "w": {"dtype": "F32", "shape": [1], "data_offsets": [0, 4]},
        },
        b"\0" * 4,
    )
    store = parse_safetensors(raw)
    assert store.metadata == {"format": "pt"}
    assert parse_safetensors(write_safetensors(store)).metadata == {"format": "pt"}


def test_truncation_fuzz_yields_typed_errors():
    store = TensorStore()
    rng = np.random.default_rng(1)
    store.add("one", rng.normal(size=(1, 1, 3, 3)).astype(np.float32))
    store.add("two", rng.normal(size=(4,)), dtype="F64")
    store.add("three", rng.normal(size=(2, 2)), dtype="F64")
    blob = write_safetensors(store)
    assert parse_safetensors(blob) == store
    for cut in range(len(blob)):
        with pytest.raises(SafetensorsError):
            parse_safetensors(blob[:cut])
