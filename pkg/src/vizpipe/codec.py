"""P6DF v1: the little-endian columnar wire format for DataFrames.

Layout (all integers little-endian):

    magic      4 bytes  0x50 0x36 0x44 0x46 ("P6DF")
    version    u8       currently 1
    col_count  u32
    per column:
        name_len   u16, then UTF-8 name bytes
        dtype      u8   0=float64  1=int64  2=categorical
        row_count  u64
        has_nulls  u8
        [null bitset, ceil(rows/8) bytes, LSB-first, bit 1 = value present]
        payload:
            float64/int64: row_count * 8 bytes
            categorical:   dict_size u32,
                           dict_size entries of (u16 len + UTF-8),
                           row_count * u32 codes

decode(encode(frame)) reproduces the frame bit-for-bit, null masks and
dictionaries included.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import BadMagic, TruncatedPayload, UnsupportedVersion
from .frame import CATEGORICAL, FLOAT64, INT64, Column, DataFrame

MAGIC = b"P6DF"
VERSION = 1

_DTYPE_CODES = {FLOAT64: 0, INT64: 1, CATEGORICAL: 2}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def encode(frame: DataFrame) -> bytes:
    parts = [MAGIC, struct.pack("<BI", VERSION, len(frame.columns))]
    for col in frame.columns:
        name = col.name.encode("utf-8")
        parts.append(struct.pack("<H", len(name)))
        parts.append(name)
        parts.append(struct.pack("<BQB", _DTYPE_CODES[col.dtype], col.row_count, int(col.has_nulls)))
        if col.has_nulls:
            parts.append(np.packbits(col.valid, bitorder="little").tobytes())
        if col.dtype == CATEGORICAL:
            parts.append(struct.pack("<I", len(col.dictionary)))
            for entry in col.dictionary:
                raw = entry.encode("utf-8")
                parts.append(struct.pack("<H", len(raw)))
                parts.append(raw)
            parts.append(np.ascontiguousarray(col.values, dtype="<u4").tobytes())
        elif col.dtype == FLOAT64:
            parts.append(np.ascontiguousarray(col.values, dtype="<f8").tobytes())
        else:
            parts.append(np.ascontiguousarray(col.values, dtype="<i8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def read(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise TruncatedPayload(f"needed {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))


def decode(data: bytes) -> DataFrame:
    reader = _Reader(data)
    if reader.read(4) != MAGIC:
        raise BadMagic("not a P6DF payload")
    (version,) = reader.unpack("<B")
    if version != VERSION:
        raise UnsupportedVersion(f"P6DF version {version} not supported (max {VERSION})")
    (col_count,) = reader.unpack("<I")
    columns = []
    for _ in range(col_count):
        (name_len,) = reader.unpack("<H")
        name = reader.read(name_len).decode("utf-8")
        dtype_code, row_count, has_nulls = reader.unpack("<BQB")
        if dtype_code not in _CODE_DTYPES:
            raise TruncatedPayload(f"unknown dtype code {dtype_code}")
        dtype = _CODE_DTYPES[dtype_code]
        valid = None
        if has_nulls:
            raw = reader.read((row_count + 7) // 8)
            bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
            valid = bits[:row_count].astype(bool)
        if dtype == CATEGORICAL:
            (dict_size,) = reader.unpack("<I")
            dictionary = []
            for _ in range(dict_size):
                (entry_len,) = reader.unpack("<H")
                dictionary.append(reader.read(entry_len).decode("utf-8"))
            values = np.frombuffer(reader.read(row_count * 4), dtype="<u4").astype(np.uint32)
            columns.append(Column(name, CATEGORICAL, values, valid, tuple(dictionary)))
        elif dtype == FLOAT64:
            values = np.frombuffer(reader.read(row_count * 8), dtype="<f8").astype(np.float64)
            columns.append(Column(name, FLOAT64, values, valid))
        else:
            values = np.frombuffer(reader.read(row_count * 8), dtype="<i8").astype(np.int64)
            columns.append(Column(name, INT64, values, valid))
    if reader.pos != len(data):
        raise TruncatedPayload(f"{len(data) - reader.pos} trailing bytes after frame")
    return DataFrame(columns)
