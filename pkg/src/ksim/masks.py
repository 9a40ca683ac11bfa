"""Sampling-mask generation and serialization.

Three pattern families select which k-space bins are acquired:

* ``fastmri``: full columns; a fixed central band plus randomly chosen
  outer columns (the only stochastic pattern, driven by a seeded PCG64).
* ``radial``: evenly spaced full diameters through the DC bin, rasterized
  with a supercover line algorithm (every cell the ideal line touches).
* ``spiral``: Archimedean arms walked outward from DC at sub-pixel arc
  steps, pitch tuned by bisection.

Radial and spiral masks hit their target bin count exactly: the spoke or
arm family is sized to stay at or under the target and the remainder is
filled (or the tail trimmed) deterministically.  Counts use round-half-up
throughout.  Masks serialize as PBM P4 with a JSON metadata sidecar.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

SUPPORTED_ACCELERATIONS = (2, 4, 8, 16, 32, 64)


class FractionBelowCenter(Exception):
    """fastmri pattern cannot reach the requested fraction: the fixed
    central band alone already exceeds the column budget."""


class SpiralGeometryError(Exception):
    """Pitch bisection cannot bracket the target count (degenerate grid)."""


@dataclass
class MaskMeta:
    pattern: str
    target_fraction: float
    achieved_fraction: float
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class Mask:
    bits: np.ndarray  # 2D bool, True = sampled
    meta: MaskMeta

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def accel_to_fraction(accel: int, downscale: int = 1) -> float:
    """Fraction of k-space kept at a given acceleration factor (1/accel).

    With ``downscale`` s, a combined low-resolution + undersampling path
    contributes s^2 to the total, so a total acceleration must be divisible
    by s^2 for the bookkeeping to be consistent.
    """
    if accel < 1:
        raise ValueError(f"acceleration must be >= 1, got {accel}")
    if downscale < 1:
        raise ValueError(f"downscale must be >= 1, got {downscale}")
    if accel % (downscale * downscale) != 0:
        raise ValueError(
            f"acceleration {accel} is not divisible by downscale^2 = {downscale * downscale}"
        )
    return 1.0 / accel


def total_accel(downscale: int, undersample_accel: int) -> int:
    """Total acceleration of a combined path: downscale^2 * undersampling."""
    if downscale < 1 or undersample_accel < 1:
        raise ValueError("factors must be >= 1")
    return downscale * downscale * undersample_accel


def _check_geometry(height: int, width: int) -> None:
    if height < 1 or width < 1:
        raise ValueError(f"bad mask geometry {height}x{width}")


# ---------------------------------------------------------------------------
# fastmri (cartesian columns)
# ---------------------------------------------------------------------------

def make_fastmri_mask(
    height: int,
    width: int,
    fraction: float,
    center_fraction: float = 0.08,
    seed: int = 0,
) -> Mask:
    """Column mask: a contiguous central band of ``center_fraction`` of the
    columns is always sampled; the remaining budget is drawn uniformly
    without replacement from the outer columns using a PCG64 stream."""
    _check_geometry(height, width)
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n_cols = round_half_up(fraction * width)
    n_center = round_half_up(center_fraction * width)
    if n_cols < n_center:
        raise FractionBelowCenter(
            f"{n_cols} columns at fraction {fraction} cannot hold the "
            f"{n_center}-column central band"
        )
    pad = (width - n_center + 1) // 2
    center_cols = np.arange(pad, pad + n_center)
    outer = np.setdiff1d(np.arange(width), center_cols)
    rng = np.random.default_rng(seed)
    extra = rng.choice(outer, size=n_cols - n_center, replace=False)
    bits = np.zeros((height, width), dtype=bool)
    bits[:, center_cols] = True
    bits[:, extra] = True
    meta = MaskMeta(
        pattern="fastmri",
        target_fraction=fraction,
        achieved_fraction=n_cols / width,
        seed=seed,
        params={"center_fraction": center_fraction},
    )
    return Mask(bits, meta)


# ---------------------------------------------------------------------------
# radial (diameters through DC)
# ---------------------------------------------------------------------------

def _spoke_bits(height: int, width: int, theta: float) -> np.ndarray:
    """Supercover rasterization of the full diameter at angle ``theta``
    through the DC bin center: every cell whose closed unit box the ideal
    line touches is marked.

    Bounds are computed relative to the integer DC coordinates so that the
    marking decision is exactly symmetric under 180-degree rotation about
    DC (floating-point rounding is negation-symmetric).
    """
    cy, cx = height // 2, width // 2
    c, s = math.cos(theta), math.sin(theta)
    if abs(c) >= abs(s):
        # shallow: columns drive, mark the row interval the line sweeps
        slope = s / c
        t0 = (np.arange(width) - cx) - 0.5
        t1 = t0 + 1.0
        z0, z1 = slope * t0, slope * t1
        zmin, zmax = np.minimum(z0, z1), np.maximum(z0, z1)
        rlo = cy + np.ceil(zmin - 0.5)
        rhi = cy + np.floor(zmax + 0.5)
        rows = np.arange(height).reshape(-1, 1)
        return (rows >= rlo) & (rows <= rhi)
    slope = c / s
    t0 = (np.arange(height) - cy) - 0.5
    t1 = t0 + 1.0
    z0, z1 = slope * t0, slope * t1
    zmin, zmax = np.minimum(z0, z1), np.maximum(z0, z1)
    clo = cx + np.ceil(zmin - 0.5)
    chi = cx + np.floor(zmax + 0.5)
    cols = np.arange(width).reshape(1, -1)
    return (cols >= clo.reshape(-1, 1)) & (cols <= chi.reshape(-1, 1))


def radial_spoke_union(height: int, width: int, spoke_count: int, angle_offset: float = 0.0) -> np.ndarray:
    """Union of ``spoke_count`` diameters at angles offset + i*pi/count."""
    bits = np.zeros((height, width), dtype=bool)
    for i in range(spoke_count):
        bits |= _spoke_bits(height, width, angle_offset + i * math.pi / spoke_count)
    return bits


def _take_nearest(candidates: np.ndarray, cy: int, cx: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Pick ``count`` candidate pixels in order of increasing radius from
    DC, ties broken by (row, col)."""
    rr, cc = np.nonzero(candidates)
    rad2 = (rr - cy) ** 2 + (cc - cx) ** 2
    order = np.lexsort((cc, rr, rad2))[:count]
    return rr[order], cc[order]


def make_radial_mask(
    height: int,
    width: int,
    fraction: float,
    angle_offset: float = 0.0,
) -> Mask:
    """Radial mask with an exact sampled-bin count.

    The base set is the largest family of evenly spaced diameters whose
    union stays at or under round(fraction * H * W); the deficit is filled
    from additional diameters of the next (one-larger) family, taking
    pixels in order of increasing radius from DC.  Fully deterministic.
    """
    _check_geometry(height, width)
    if not 0.0 < fraction <= 0.5:
        raise ValueError(f"radial fraction must be in (0, 0.5], got {fraction}")
    target = round_half_up(fraction * height * width)
    cy, cx = height // 2, width // 2

    def popcount(n: int) -> int:
        return int(np.count_nonzero(radial_spoke_union(height, width, n, angle_offset)))

    # bracket the largest spoke count with popcount <= target
    n = 0
    if popcount(1) <= target:
        lo = 1
        hi = 2
        while popcount(hi) <= target:
            lo = hi
            hi *= 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if popcount(mid) <= target:
                lo = mid
            else:
                hi = mid
        n = lo
        # popcount is not strictly guaranteed monotone in the family size
        while popcount(n + 1) <= target:
            n += 1
        while n > 0 and popcount(n) > target:
            n -= 1

    bits = radial_spoke_union(height, width, n, angle_offset)
    deficit = target - int(np.count_nonzero(bits))
    extra_step = math.pi / (n + 1)
    i = n
    while deficit > 0:
        spoke = _spoke_bits(height, width, angle_offset + i * extra_step)
        fresh = spoke & ~bits
        take = min(deficit, int(np.count_nonzero(fresh)))
        if take > 0:
            rr, cc = _take_nearest(fresh, cy, cx, take)
            bits[rr, cc] = True
            deficit -= take
        i += 1
        if i > n + 8 * (n + 2):  # every direction revisited many times over
            raise RuntimeError("radial fill did not converge")

    meta = MaskMeta(
        pattern="radial",
        target_fraction=fraction,
        achieved_fraction=target / (height * width),
        params={"spoke_count": n, "angle_offset": angle_offset},
    )
    return Mask(bits, meta)


# ---------------------------------------------------------------------------
# spiral (Archimedean arms)
# ---------------------------------------------------------------------------

_SPIRAL_NEWTON_ITERS = 16
_SPIRAL_STEP = 0.5


def spiral_trajectory(
    height: int,
    width: int,
    pitch: float,
    arm_count: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Pixel visit sequence of the spiral walk, in traversal order.

    Each arm follows r = pitch * angle out to the corner radius.  Sample
    angles are spaced exactly 0.5 px apart in arc length (chord <= arc, so
    consecutive points are at most 0.5 px apart), arms interleaved per
    step.  Angles come from Newton inversion of the closed-form arc length
    s(theta) = pitch/2 * (theta*sqrt(1+theta^2) + asinh(theta)).  Returns
    (rows, cols) of every in-bounds sample, duplicates included.
    """
    y, x = spiral_points(height, width, pitch, arm_count)
    rows = np.floor(y + 0.5).astype(np.int64).ravel()
    cols = np.floor(x + 0.5).astype(np.int64).ravel()
    ok = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
    return rows[ok], cols[ok]


def spiral_points(
    height: int,
    width: int,
    pitch: float,
    arm_count: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Continuous (y, x) spiral samples, shape (steps, arms), before any
    rasterization or bounds filtering."""
    cy, cx = height // 2, width // 2
    r_max = math.hypot(height / 2.0, width / 2.0)
    theta_max = r_max / pitch
    s_total = 0.5 * pitch * (theta_max * math.sqrt(1 + theta_max**2) + math.asinh(theta_max))
    n_steps = int(s_total / _SPIRAL_STEP)
    s = np.arange(n_steps + 1) * _SPIRAL_STEP
    theta = np.sqrt(2.0 * s / pitch)
    for _ in range(_SPIRAL_NEWTON_ITERS):
        f = 0.5 * pitch * (theta * np.sqrt(1 + theta**2) + np.arcsinh(theta)) - s
        theta = np.maximum(theta - f / (pitch * np.sqrt(1 + theta**2)), 0.0)
    r = pitch * theta
    phases = 2.0 * math.pi * np.arange(arm_count) / arm_count
    phi = theta[:, None] + phases[None, :]
    return cy + r[:, None] * np.sin(phi), cx + r[:, None] * np.cos(phi)


def _spiral_visit_order(height: int, width: int, pitch: float, arm_count: int) -> np.ndarray:
    """Linear pixel indices in first-visit order."""
    rows, cols = spiral_trajectory(height, width, pitch, arm_count)
    lin = rows * width + cols
    _, first = np.unique(lin, return_index=True)
    return lin[np.sort(first)]


def make_spiral_mask(
    height: int,
    width: int,
    fraction: float,
    arm_count: int = 1,
) -> Mask:
    """Spiral mask with an exact sampled-bin count.

    The pitch is bisected (at most 64 iterations) until the walk covers at
    least the target count, stopping early once the cover is within one
    pixel of the target; trailing (outermost) pixels are then dropped in
    reverse first-visit order to land on the count exactly.
    """
    _check_geometry(height, width)
    if not 0.0 < fraction <= 0.5:
        raise ValueError(f"spiral fraction must be in (0, 0.5], got {fraction}")
    if arm_count < 1:
        raise ValueError(f"arm_count must be >= 1, got {arm_count}")
    target = round_half_up(fraction * height * width)
    r_max = math.hypot(height / 2.0, width / 2.0)
    cache: dict[float, int] = {}

    def covered(b: float) -> int:
        if b not in cache:
            cache[b] = len(_spiral_visit_order(height, width, b, arm_count))
        return cache[b]

    # dense pitches cover more pixels: bracket the target between lo and hi
    lo = r_max / 64.0
    tries = 0
    while covered(lo) < target:
        lo /= 2.0
        tries += 1
        if tries > 20:
            raise SpiralGeometryError(
                f"cannot cover {target} pixels on a {height}x{width} grid"
            )
    hi = r_max
    while covered(hi) >= target and hi < 64.0 * r_max:
        hi *= 2.0
    if covered(hi) >= target:
        # even the sparsest walk overshoots the target; trimming handles it
        best, best_count = hi, covered(hi)
    else:
        best, best_count = lo, covered(lo)
        for _ in range(64):
            if best_count - target <= 1 or hi - lo <= 1e-12 * r_max:
                break
            mid = 0.5 * (lo + hi)
            c = covered(mid)
            if c >= target:
                lo = mid
                if c < best_count:
                    best, best_count = mid, c
            else:
                hi = mid

    order = _spiral_visit_order(height, width, best, arm_count)
    keep = order[:target]
    bits = np.zeros(height * width, dtype=bool)
    bits[keep] = True
    bits = bits.reshape(height, width)
    meta = MaskMeta(
        pattern="spiral",
        target_fraction=fraction,
        achieved_fraction=target / (height * width),
        params={"arm_count": arm_count, "pitch": best},
    )
    return Mask(bits, meta)


# ---------------------------------------------------------------------------
# full sampling + dispatch
# ---------------------------------------------------------------------------

def make_full_mask(height: int, width: int, pattern: str = "full") -> Mask:
    """All-true mask (acceleration 1); any pattern label degenerates to it."""
    _check_geometry(height, width)
    bits = np.ones((height, width), dtype=bool)
    meta = MaskMeta(pattern=pattern, target_fraction=1.0, achieved_fraction=1.0)
    return Mask(bits, meta)


def make_mask(
    pattern: str,
    height: int,
    width: int,
    fraction: float,
    seed: int = 0,
    center_fraction: float = 0.08,
    angle_offset: float = 0.0,
    arm_count: int = 1,
) -> Mask:
    """Factory over the pattern families; fraction 1.0 short-circuits to the
    full mask for every pattern."""
    if fraction == 1.0:
        return make_full_mask(height, width, pattern)
    if pattern == "fastmri":
        return make_fastmri_mask(height, width, fraction, center_fraction, seed)
    if pattern == "radial":
        return make_radial_mask(height, width, fraction, angle_offset)
    if pattern == "spiral":
        return make_spiral_mask(height, width, fraction, arm_count)
    raise ValueError(f"unknown mask pattern {pattern!r}")


# ---------------------------------------------------------------------------
# serialization (PBM P4 + JSON sidecar)
# ---------------------------------------------------------------------------

def mask_to_pbm_bytes(mask: Mask) -> bytes:
    header = f"P4\n{mask.width} {mask.height}\n".encode("ascii")
    return header + np.packbits(mask.bits, axis=1).tobytes()


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def write_mask(mask: Mask, path: str | Path) -> None:
    """Write bits as PBM P4 plus a JSON sidecar with the metadata."""
    p = Path(path)
    p.write_bytes(mask_to_pbm_bytes(mask))
    doc = {
        "pattern": mask.meta.pattern,
        "height": mask.height,
        "width": mask.width,
        "target_fraction": mask.meta.target_fraction,
        "achieved_fraction": mask.meta.achieved_fraction,
        "seed": mask.meta.seed,
        "params": mask.meta.params,
    }
    _sidecar_path(p).write_text(json.dumps(doc, indent=2) + "\n")


def read_mask(path: str | Path) -> Mask:
    """Read a PBM P4 mask; metadata comes from the sidecar when present,
    otherwise the pattern is marked unknown and fractions are recomputed
    from the bit count."""
    p = Path(path)
    data = p.read_bytes()
    if data[:2] != b"P4":
        raise ValueError(f"{p} is not a PBM P4 file")
    pos = 2
    fields: list[int] = []
    while len(fields) < 2:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1
    width, height = fields
    row_bytes = (width + 7) // 8
    payload = data[pos : pos + height * row_bytes]
    if len(payload) != height * row_bytes:
        raise ValueError("truncated PBM payload")
    packed = np.frombuffer(payload, dtype="u1").reshape(height, row_bytes)
    bits = np.unpackbits(packed, axis=1)[:, :width].astype(bool)
    sidecar = _sidecar_path(p)
    if sidecar.exists():
        doc = json.loads(sidecar.read_text())
        if doc.get("height") != height or doc.get("width") != width:
            raise ValueError("sidecar dimensions disagree with PBM header")
        meta = MaskMeta(
            pattern=doc["pattern"],
            target_fraction=doc["target_fraction"],
            achieved_fraction=doc["achieved_fraction"],
            seed=doc.get("seed", 0),
            params=doc.get("params", {}),
        )
    else:
        frac = int(np.count_nonzero(bits)) / (height * width)
        meta = MaskMeta(pattern="unknown", target_fraction=frac, achieved_fraction=frac)
    return Mask(bits, meta)
