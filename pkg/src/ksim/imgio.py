"""Slice I/O and synthetic phantoms.

A slice is a plain 2D float64 array with finite values, nominally in [0, 1].
Two on-disk formats are supported:

* PGM (P5 binary, Netpbm): 8-bit, or 16-bit with big-endian samples.
  Integer samples are scaled to [0, 1] by the format maximum on read.
* KSIM: a little-endian lossless container for float64 slices and packed
  boolean grids.  Layout: ``magic "KSIM" (4s) | version (u16) | dtype (u16)
  | height (u32) | width (u32) | payload``.  dtype 0 is row-major float64;
  dtype 1 is a bitset, each row packed MSB-first and padded to a byte.

Phantoms stand in for scanner data so everything downstream is testable
without any external dataset.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

KSIM_MAGIC = b"KSIM"
KSIM_VERSION = 1
_KSIM_HEADER = struct.Struct("<4sHHII")

_MAX_PIXELS = 1 << 30


class FormatError(Exception):
    """Raised when a file does not parse in the declared format."""


def validate_slice(arr: np.ndarray) -> np.ndarray:
    """Check the slice contract (2D, finite) and return a float64 view."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"slice must be a non-empty 2D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("slice contains non-finite values")
    return a


# ---------------------------------------------------------------------------
# PGM (P5)
# ---------------------------------------------------------------------------

def _read_pgm_header(data: bytes) -> tuple[int, int, int, int]:
    """Parse a P5 header, returning (width, height, maxval, payload_offset)."""
    if data[:2] != b"P5":
        raise FormatError("not a P5 PGM file")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise FormatError(f"malformed PGM header token {token!r}")
        fields.append(int(token))
    # single whitespace byte separates maxval from binary samples
    pos += 1
    width, height, maxval = fields
    return width, height, maxval, pos


def _read_pgm(data: bytes) -> tuple[np.ndarray, int]:
    width, height, maxval, offset = _read_pgm_header(data)
    if width < 1 or height < 1 or width * height > _MAX_PIXELS:
        raise FormatError(f"bad PGM dimensions {width}x{height}")
    if maxval == 255:
        dt = np.dtype("u1")
    elif maxval == 65535:
        dt = np.dtype(">u2")
    else:
        raise FormatError(f"unsupported PGM maxval {maxval}")
    need = width * height * dt.itemsize
    payload = data[offset : offset + need]
    if len(payload) != need:
        raise FormatError("truncated PGM payload")
    raw = np.frombuffer(payload, dtype=dt).reshape(height, width)
    return raw.astype(np.float64) / maxval, maxval


# ---------------------------------------------------------------------------
# KSIM container
# ---------------------------------------------------------------------------

def write_tensor(arr: np.ndarray, path: str | Path) -> None:
    """Write a float64 slice (dtype 0) or boolean grid (dtype 1) as KSIM."""
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError("KSIM stores 2D arrays")
    h, w = a.shape
    if a.dtype == np.bool_:
        dtype_code = 1
        payload = np.packbits(a, axis=1).tobytes()
    else:
        dtype_code = 0
        payload = np.ascontiguousarray(a, dtype="<f8").tobytes()
    header = _KSIM_HEADER.pack(KSIM_MAGIC, KSIM_VERSION, dtype_code, h, w)
    Path(path).write_bytes(header + payload)


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a KSIM file; returns float64 for dtype 0, bool for dtype 1."""
    data = Path(path).read_bytes()
    if len(data) < _KSIM_HEADER.size:
        raise FormatError("truncated KSIM header")
    magic, version, dtype_code, h, w = _KSIM_HEADER.unpack_from(data)
    if magic != KSIM_MAGIC:
        raise FormatError("bad KSIM magic")
    if version != KSIM_VERSION:
        raise FormatError(f"unsupported KSIM version {version}")
    if h < 1 or w < 1 or h * w > _MAX_PIXELS:
        raise FormatError(f"bad KSIM dimensions {h}x{w}")
    payload = data[_KSIM_HEADER.size :]
    if dtype_code == 0:
        need = h * w * 8
        if len(payload) != need:
            raise FormatError("KSIM payload length mismatch")
        return np.frombuffer(payload, dtype="<f8").reshape(h, w).copy()
    if dtype_code == 1:
        row_bytes = (w + 7) // 8
        if len(payload) != h * row_bytes:
            raise FormatError("KSIM payload length mismatch")
        packed = np.frombuffer(payload, dtype="u1").reshape(h, row_bytes)
        return np.unpackbits(packed, axis=1)[:, :w].astype(bool)
    raise FormatError(f"unknown KSIM dtype code {dtype_code}")


# ---------------------------------------------------------------------------
# Slice read/write
# ---------------------------------------------------------------------------

def _infer_format(path: Path, data: bytes) -> str:
    if data[:4] == KSIM_MAGIC:
        return "ksim"
    if data[:2] == b"P5":
        _, _, maxval, _ = _read_pgm_header(data)
        return "pgm8" if maxval == 255 else "pgm16"
    raise FormatError(f"cannot infer format of {path}")


def read_slice(path: str | Path, format: str = "auto") -> np.ndarray:
    """Read a slice from disk.

    Integer PGM samples are scaled to [0, 1] by the format maximum (255 or
    65535); KSIM float64 payloads are read verbatim.  ``format`` may be
    ``pgm8``, ``pgm16``, ``ksim``, or ``auto`` (sniff magic bytes).
    """
    p = Path(path)
    data = p.read_bytes()
    fmt = _infer_format(p, data) if format == "auto" else format
    if fmt == "ksim":
        arr = read_tensor(p)
        if arr.dtype == np.bool_:
            raise FormatError("KSIM file holds a bitset, not a float slice")
    elif fmt in ("pgm8", "pgm16"):
        arr, maxval = _read_pgm(data)
        if fmt == "pgm8" and maxval != 255:
            raise FormatError("declared pgm8 but file maxval is not 255")
        if fmt == "pgm16" and maxval != 65535:
            raise FormatError("declared pgm16 but file maxval is not 65535")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if not np.all(np.isfinite(arr)):
        raise FormatError("non-finite payload values")
    return arr


def write_slice(slice_: np.ndarray, path: str | Path, format: str = "auto") -> None:
    """Write a slice as ``pgm16`` or ``ksim``.

    KSIM round-trips bit-exactly.  PGM16 clips to [0, 1] and quantizes with
    round-half-up to ``round(v * 65535)``, big-endian samples.
    """
    a = validate_slice(slice_)
    p = Path(path)
    fmt = format
    if fmt == "auto":
        fmt = "ksim" if p.suffix.lower() == ".ksim" else "pgm16"
    if fmt == "ksim":
        write_tensor(a, p)
    elif fmt == "pgm16":
        q = np.floor(np.clip(a, 0.0, 1.0) * 65535 + 0.5).astype(">u2")
        header = f"P5\n{a.shape[1]} {a.shape[0]}\n65535\n".encode("ascii")
        p.write_bytes(header + q.tobytes())
    else:
        raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Phantoms
# ---------------------------------------------------------------------------

# Ellipse table for the 10-ellipse head phantom, contrast-adjusted variant.
# Additive values are stored in twentieths (1.0 = 20) and accumulated as
# integers so overlaps like skull - gray matter - ventricle cancel exactly:
# (semi-axis x, semi-axis y, center x, center y, rotation deg, value * 20)
_HEAD_ELLIPSES = (
    (0.69, 0.92, 0.0, 0.0, 0.0, 20),
    (0.6624, 0.874, 0.0, -0.0184, 0.0, -16),
    (0.11, 0.31, 0.22, 0.0, -18.0, -4),
    (0.16, 0.41, -0.22, 0.0, 18.0, -4),
    (0.21, 0.25, 0.0, 0.35, 0.0, 2),
    (0.046, 0.046, 0.0, 0.1, 0.0, 2),
    (0.046, 0.046, 0.0, -0.1, 0.0, 2),
    (0.046, 0.023, -0.08, -0.605, 0.0, 2),
    (0.023, 0.023, 0.0, -0.606, 0.0, 2),
    (0.023, 0.046, 0.06, -0.605, 0.0, 2),
)


def _shepp_logan(size: int) -> np.ndarray:
    coords = np.linspace(-1.0, 1.0, size)
    x = np.tile(coords, (size, 1))
    y = np.tile(coords[::-1].reshape(-1, 1), (1, size))  # row 0 is y = +1
    acc = np.zeros((size, size), dtype=np.int64)
    for sx, sy, x0, y0, deg, val in _HEAD_ELLIPSES:
        phi = np.deg2rad(deg)
        xr = (x - x0) * np.cos(phi) + (y - y0) * np.sin(phi)
        yr = -(x - x0) * np.sin(phi) + (y - y0) * np.cos(phi)
        acc[(xr / sx) ** 2 + (yr / sy) ** 2 <= 1.0] += val
    img = acc / 20.0
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


# The two-mode intensity profile is an explicit quartic density on [0, 0.7]
# with maxima at 0.1 and 0.6 and a minimum at 0.35:
#   g(v) = 1 - _BIMODAL_GAIN * (v^4/4 - 0.35 v^3 + 0.1525 v^2 - 0.021 v)
# Pixels are drawn by inverting the CDF on a deterministic quantile grid, so
# the histogram follows g almost exactly (no RNG involved).
_BIMODAL_GAIN = 10000.0
_BIMODAL_TOP = 0.7


def _bimodal_density_integral(v: np.ndarray) -> np.ndarray:
    """Antiderivative of the unnormalized two-mode density, zero at 0."""
    p_int = v**5 / 20 - 0.0875 * v**4 + (0.1525 / 3) * v**3 - 0.0105 * v**2
    return v - _BIMODAL_GAIN * p_int


def _bimodal_field(size: int) -> np.ndarray:
    n = size * size
    u = (np.arange(n) + 0.5) / n
    total = _bimodal_density_integral(np.array([_BIMODAL_TOP]))[0]
    target = u * total
    lo = np.zeros(n)
    hi = np.full(n, _BIMODAL_TOP)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = _bimodal_density_integral(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return (0.5 * (lo + hi)).reshape(size, size)


def make_phantom(kind: str, size: int) -> np.ndarray:
    """Generate a deterministic synthetic slice.

    ``shepp_logan`` is the classic 10-ellipse head phantom rescaled to
    [0, 1]; ``bimodal_field`` has an intensity histogram with modes at 0.1
    and 0.6 (exercises histogram-based normalization); ``ramp`` is a
    row-major linear ramp from 0 to 1.
    """
    if kind == "ramp":
        if size < 2:
            raise ValueError(f"ramp size must be >= 2, got {size}")
        return np.linspace(0.0, 1.0, size * size).reshape(size, size)
    if size < 8:
        raise ValueError(f"phantom size must be >= 8, got {size}")
    if kind == "shepp_logan":
        return _shepp_logan(size)
    if kind == "bimodal_field":
        return _bimodal_field(size)
    raise ValueError(f"unknown phantom kind {kind!r}")
