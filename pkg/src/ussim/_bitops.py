"""Bit-vector plumbing shared by the key stores and the protocol.

A bit string is a numpy uint8 array holding one bit per element, most
significant bit first. Packed integers follow the same big-endian
convention.
"""
from __future__ import annotations

import numpy as np


def int_to_bits(value: int, width: int) -> np.ndarray:
    if width < 0:
        raise ValueError("width must be non-negative")
    if value < 0 or value.bit_length() > width:
        raise ValueError(f"value {value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for b in np.asarray(bits, dtype=np.uint8):
        out = (out << 1) | int(b)
    return out


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack each row of a (rows, width) bit matrix into one integer.

    Rows wider than 64 bits fall back to an object array of Python ints.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 2:
        raise ValueError("pack_rows expects a 2-d bit matrix")
    rows, width = bits.shape
    if width <= 64:
        vals = np.zeros(rows, dtype=np.uint64)
        one = np.uint64(1)
        for i in range(width):
            vals = (vals << one) | bits[:, i].astype(np.uint64)
        return vals
    vals = np.zeros(rows, dtype=object)
    for i in range(width):
        vals = (vals << 1) | bits[:, i].astype(object)
    return vals


def unpack_rows(vals: np.ndarray, width: int) -> np.ndarray:
    """Inverse of pack_rows: (n,) integers to an (n, width) bit matrix."""
    vals = np.asarray(vals)
    out = np.empty((vals.size, width), dtype=np.uint8)
    if vals.dtype == object:
        for i in range(width):
            out[:, i] = ((vals >> (width - 1 - i)) & 1).astype(np.uint8)
        return out
    vals = vals.astype(np.uint64)
    one = np.uint64(1)
    for i in range(width):
        out[:, i] = ((vals >> np.uint64(width - 1 - i)) & one).astype(np.uint8)
    return out


def bits_to_bytes(bits: np.ndarray) -> bytes:
    """Pack a bit string into bytes, zero-padded at the end."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def bytes_to_bits(data: bytes, n_bits: int) -> np.ndarray:
    arr = np.frombuffer(data, dtype=np.uint8)
    if arr.size * 8 < n_bits:
        raise ValueError(f"need {n_bits} bits, got {arr.size * 8}")
    return np.unpackbits(arr)[:n_bits]
