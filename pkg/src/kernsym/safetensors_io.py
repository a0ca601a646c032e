"""Byte-level reader/writer for the safetensors weight container.

Layout: an 8-byte little-endian unsigned header length L, then L bytes
of JSON mapping tensor names to {"dtype", "shape", "data_offsets":
[begin, end)}, then the data buffer the offsets index into. An optional
"__metadata__" object (string to string) rides along untouched.

Supported dtype tags: F32 and F64 natively; F16 is accepted and widened
to F64 at parse time (all analysis math is 64-bit anyway). The writer
emits a canonical form: minified JSON, names in insertion order,
offsets contiguous and ascending from 0, so write -> parse -> write is
byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BadOffsets, MalformedHeader, TruncatedFile, UnsupportedDtype

_DTYPE_WIDTH = {"F16": 2, "F32": 4, "F64": 8}
_NP_DTYPE = {"F16": "<f2", "F32": "<f4", "F64": "<f8"}


@dataclass(frozen=True)
class TensorEntry:
    dtype: str
    shape: tuple[int, ...]
    data: bytes

    def n_elements(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n


class TensorStore:
    """Insertion-ordered mapping from tensor name to raw little-endian data."""

    def __init__(self, metadata: dict[str, str] | None = None):
        self._entries: dict[str, TensorEntry] = {}
        self.metadata = metadata

    def add(self, name: str, array, dtype: str | None = None) -> None:
        """Store an array under name. dtype defaults to F32/F64 matching the array."""
        a = np.asarray(array)
        if dtype is None:
            dtype = "F32" if a.dtype == np.float32 else "F64"
        if dtype not in _NP_DTYPE:
            raise UnsupportedDtype(f"dtype tag {dtype!r} not supported")
        if name in self._entries:
            raise ValueError(f"duplicate tensor name {name!r}")
        raw = np.ascontiguousarray(a, dtype=_NP_DTYPE[dtype]).tobytes()
        self._entries[name] = TensorEntry(dtype, tuple(int(d) for d in a.shape), raw)

    def add_raw(self, name: str, dtype: str, shape: tuple[int, ...], data: bytes) -> None:
        if name in self._entries:
            raise ValueError(f"duplicate tensor name {name!r}")
        if len(data) != _DTYPE_WIDTH[dtype] * int(np.prod(shape, dtype=np.int64)):
            raise BadOffsets(f"tensor {name!r}: data length inconsistent with shape")
        self._entries[name] = TensorEntry(dtype, tuple(shape), data)

    def names(self) -> list[str]:
        return list(self._entries)

    def entry(self, name: str) -> TensorEntry:
        return self._entries[name]

    def to_array(self, name: str) -> np.ndarray:
        """Decode a tensor to a float64 array (storage may be narrower)."""
        e = self._entries[name]
        a = np.frombuffer(e.data, dtype=_NP_DTYPE[e.dtype]).reshape(e.shape)
        return a.astype(np.float64)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorStore):
            return NotImplemented
        return self.metadata == other.metadata and self._entries == other._entries


def parse_safetensors(data: bytes) -> TensorStore:
    """Parse container bytes into a TensorStore.

    Never reads outside declared offsets; every malformed input raises a
    typed SafetensorsError subclass.
    """
    if len(data) < 8:
        raise TruncatedFile(f"file is {len(data)} bytes, need at least 8 for the header length")
    header_len = int.from_bytes(data[:8], "little", signed=False)
    if 8 + header_len > len(data):
        raise TruncatedFile(f"header claims {header_len} bytes but only {len(data) - 8} follow")
    try:
        header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHeader(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise MalformedHeader("header must be a JSON object")

    buf = data[8 + header_len :]
    metadata = None
    spans: list[tuple[int, int, str]] = []
    store = TensorStore()
    for name, info in header.items():
        if name == "__metadata__":
            if not isinstance(info, dict) or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in info.items()
            ):
                raise MalformedHeader("__metadata__ must map strings to strings")
            metadata = dict(info)
            continue
        if not isinstance(info, dict):
            raise MalformedHeader(f"tensor {name!r}: entry must be an object")
        dtype = info.get("dtype")
        shape = info.get("shape")
        offsets = info.get("data_offsets")
        if not isinstance(dtype, str):
            raise MalformedHeader(f"tensor {name!r}: dtype must be a string")
        if dtype not in _DTYPE_WIDTH:
            raise UnsupportedDtype(f"tensor {name!r}: dtype {dtype!r} not supported")
        if (
            not isinstance(shape, list)
            or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 0 for d in shape)
        ):
            raise MalformedHeader(f"tensor {name!r}: shape must be a list of non-negative ints")
        if (
            not isinstance(offsets, list)
            or len(offsets) != 2
            or not all(isinstance(o, int) and not isinstance(o, bool) for o in offsets)
        ):
            raise MalformedHeader(f"tensor {name!r}: data_offsets must be [begin, end]")
        begin, end = offsets
        if begin < 0 or begin > end or end > len(buf):
            raise BadOffsets(f"tensor {name!r}: offsets [{begin}, {end}) leave the data buffer")
        expected = _DTYPE_WIDTH[dtype] * int(np.prod(shape, dtype=np.int64))
        if end - begin != expected:
            raise BadOffsets(
                f"tensor {name!r}: {end - begin} data bytes, shape needs {expected}"
            )
        spans.append((begin, end, name))
        raw = buf[begin:end]
        if dtype == "F16":
            raw = np.frombuffer(raw, dtype="<f2").astype("<f8").tobytes()
            dtype = "F64"
        store.add_raw(name, dtype, tuple(shape), raw)

    spans.sort()
    for (b1, e1, n1), (b2, e2, n2) in zip(spans, spans[1:]):
        if b2 < e1:
            raise BadOffsets(f"tensors {n1!r} and {n2!r} overlap in the data buffer")
    store.metadata = metadata
    return store


def write_safetensors(store: TensorStore) -> bytes:
    """Serialize a store canonically; parse(write(s)) == s."""
    header: dict = {}
    if store.metadata is not None:
        header["__metadata__"] = dict(store.metadata)
    chunks: list[bytes] = []
    offset = 0
    for name in store.names():
        e = store.entry(name)
        header[name] = {
            "dtype": e.dtype,
            "shape": list(e.shape),
            "data_offsets": [offset, offset + len(e.data)],
        }
        chunks.append(e.data)
        offset += len(e.data)
    header_bytes = json.dumps(header, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return len(header_bytes).to_bytes(8, "little") + header_bytes + b"".join(chunks)


def read_safetensors_file(path) -> TensorStore:
    with open(path, "rb") as fh:
        return parse_safetensors(fh.read())


def write_safetensors_file(store: TensorStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_safetensors(store))
