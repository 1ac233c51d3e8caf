"""Reader and writer for the GRD1 raster format.

A GRD1 file is one ASCII header line ``GRD1 <rows> <cols> <dtype>`` followed by
``rows * cols`` little-endian values in row-major order. ``dtype`` is ``f64``
for images and ``u8`` for region masks.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import GridFormatError

_DTYPES = {"f64": np.dtype("<f8"), "u8": np.dtype("u1")}


def write_grid(path: str | os.PathLike, values: np.ndarray, dtype: str = "f64") -> None:
    if dtype not in _DTYPES:
        raise GridFormatError(f"unsupported dtype {dtype!r}")
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise GridFormatError("grid must be two-dimensional")
    rows, cols = arr.shape
    header = f"GRD1 {rows} {cols} {dtype}\n".encode("ascii")
    payload = np.ascontiguousarray(arr, dtype=_DTYPES[dtype]).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_grid(path: str | os.PathLike) -> tuple[np.ndarray, str]:
    """Return ``(values, dtype)``; values come back as a 2-D array."""
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()
    try:
        magic, rows, cols, dtype = header.decode("ascii").split()
        rows, cols = int(rows), int(cols)
    except (UnicodeDecodeError, ValueError) as exc:
        raise GridFormatError(f"{path}: bad header {header[:40]!r}") from exc
    if magic != "GRD1" or dtype not in _DTYPES:
        raise GridFormatError(f"{path}: bad header {header[:40]!r}")
    if rows < 1 or cols < 1:
        raise GridFormatError(f"{path}: non-positive shape {rows}x{cols}")
    np_dtype = _DTYPES[dtype]
    expected = rows * cols * np_dtype.itemsize
    if len(payload) != expected:
        raise GridFormatError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
    values = np.frombuffer(payload, dtype=np_dtype).reshape(rows, cols)
    if dtype == "f64":
        values = values.astype(np.float64)
    return values.copy(), dtype
