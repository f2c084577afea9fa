"""Binary tensor files: one JSON header line plus a raw little-endian payload.

Layout:

    {"shape":[3,4],"dtype":"f64"}\n
    <3*4 scalars, row-major, little-endian>

"f64" is IEEE-754 binary64, "f32" binary32. Writing float64 data as f32
rounds to nearest-even. Parse failures name the byte offset at which the
file stopped making sense.
"""

import json

import numpy as np

from .errors import TensorFileError

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_MAX_HEADER_BYTES = 4096


def write_tensor(path, t, encoding: str = "f64"):
    """Write an ndarray of any rank; `encoding` is "f32" or "f64"."""
    if encoding not in _DTYPES:
        raise ValueError(f"unknown encoding {encoding!r}; expected 'f32' or 'f64'")
    t = np.ascontiguousarray(t, dtype=np.float64)
    if t.ndim < 1 or any(s < 1 for s in t.shape):
        raise TensorFileError(f"refusing to write degenerate shape {t.shape}")
    header = json.dumps(
        {"shape": list(t.shape), "dtype": encoding}, separators=(",", ":")
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        fh.write(t.astype(_DTYPES[encoding]).tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    """Read a tensor file back as a float64 ndarray."""
    with open(path, "rb") as fh:
        raw = fh.read()
    newline = raw.find(b"\n", 0, _MAX_HEADER_BYTES)
    if newline < 0:
        raise TensorFileError(
            f"no header terminator within the first {min(len(raw), _MAX_HEADER_BYTES)} bytes "
            f"(byte offset 0)"
        )
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TensorFileError(f"malformed header at byte offset 0: {exc}") from exc
    if not isinstance(header, dict) or "shape" not in header or "dtype" not in header:
        raise TensorFileError("malformed header at byte offset 0: need 'shape' and 'dtype'")
    shape = header["shape"]
    if (
        not isinstance(shape, list)
        or not shape
        or not all(isinstance(s, int) and s >= 1 for s in shape)
    ):
        raise TensorFileError(f"malformed header at byte offset 0: bad shape {shape!r}")
    tag = header["dtype"]
    if tag not in _DTYPES:
        raise TensorFileError(f"malformed header at byte offset 0: unknown dtype {tag!r}")

    dtype = _DTYPES[tag]
    payload_start = newline + 1
    count = 1
    for s in shape:
        count *= s
    expected = count * dtype.itemsize
    got = len(raw) - payload_start
    if got < expected:
        raise TensorFileError(
            f"payload truncated at byte offset {len(raw)}: "
            f"expected {expected} payload bytes after offset {payload_start}, got {got}"
        )
    if got > expected:
        raise TensorFileError(
            f"trailing garbage at byte offset {payload_start + expected}: "
            f"{got - expected} bytes past the declared payload"
        )
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=payload_start)
    return data.astype(np.float64).reshape(shape)
