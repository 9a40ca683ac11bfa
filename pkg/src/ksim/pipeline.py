"""Degradation paths and baseline reconstructions.

Three acquisition paths, all expressed in centered k-space:

* ``undersample``: transform, zero out unsampled bins, inverse transform,
  take the magnitude (the zero-filled reconstruction).
* ``lowres``: keep only the central block of the spectrum, i.e. acquire a
  smaller image outright.
* ``combined``: low-resolution acquisition followed by undersampling at
  the reduced geometry.

Energy conventions (x 1/s on crop, x s on pad) keep constant images fixed
points.  Values are clipped to [0, 1] only in the bicubic stage; the
Fourier chain itself stays linear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ksim.fourier import fft2_centered, ifft2_centered
from ksim.imgio import validate_slice
from ksim.masks import Mask

PATHS = ("undersample", "lowres", "combined")
RECONS = ("zero_filled", "zero_filled_plus_bicubic", "none")


@dataclass
class DegradeSpec:
    """One acquisition path: which route, how much downscaling, which mask.

    The mask, when present, must match the post-downscale geometry.
    ``recon`` selects whether the low-resolution result is upscaled back to
    the source size with bicubic interpolation ('none' is an alias for the
    plain zero-filled output).
    """

    path: str
    downscale: int = 1
    mask: Mask | None = None
    recon: str = "zero_filled"

    def validate(self, height: int, width: int) -> None:
        if self.path not in PATHS:
            raise ValueError(f"unknown path {self.path!r}")
        if self.recon not in RECONS:
            raise ValueError(f"unknown recon {self.recon!r}")
        if self.downscale < 1:
            raise ValueError(f"downscale must be >= 1, got {self.downscale}")
        if self.path == "undersample" and self.downscale != 1:
            raise ValueError("undersample path requires downscale == 1")
        if self.path == "lowres" and self.mask is not None:
            raise ValueError("lowres path takes no mask")
        if self.path in ("undersample", "combined") and self.mask is None:
            raise ValueError(f"{self.path} path requires a mask")
        if height % self.downscale or width % self.downscale:
            raise ValueError(
                f"downscale {self.downscale} does not divide {height}x{width}"
            )
        if self.mask is not None:
            want = (height // self.downscale, width // self.downscale)
            if self.mask.bits.shape != want:
                raise ValueError(
                    f"mask shape {self.mask.bits.shape} != post-downscale {want}"
                )


def apply_mask(spectrum: np.ndarray, mask: Mask) -> np.ndarray:
    """Zero every k-space bin the mask does not sample."""
    s = np.asarray(spectrum)
    if s.shape != mask.bits.shape:
        raise ValueError(f"spectrum {s.shape} vs mask {mask.bits.shape}")
    return np.where(mask.bits, s, 0.0)


def kspace_downscale(slice_: np.ndarray, s: int) -> np.ndarray:
    """Low-resolution acquisition: central (H/s, W/s) spectrum block,
    scaled by 1/s, inverse-transformed, magnitude taken."""
    a = validate_slice(slice_)
    if s < 1:
        raise ValueError(f"downscale must be >= 1, got {s}")
    h, w = a.shape
    if h % s or w % s:
        raise ValueError(f"downscale {s} does not divide {h}x{w}")
    spec = fft2_centered(a)
    oh, ow = h // s, w // s
    r0 = h // 2 - oh // 2
    c0 = w // 2 - ow // 2
    block = spec[r0 : r0 + oh, c0 : c0 + ow] / s
    return np.abs(ifft2_centered(block))


def kspace_upscale(slice_: np.ndarray, s: int) -> np.ndarray:
    """Adjoint of :func:`kspace_downscale`: zero-pad the spectrum to
    (H*s, W*s), scale by s, inverse-transform, magnitude."""
    a = validate_slice(slice_)
    if s < 1:
        raise ValueError(f"upscale must be >= 1, got {s}")
    h, w = a.shape
    oh, ow = h * s, w * s
    spec = fft2_centered(a) * s
    out = np.zeros((oh, ow), dtype=np.complex128)
    r0 = oh // 2 - h // 2
    c0 = ow // 2 - w // 2
    out[r0 : r0 + h, c0 : c0 + w] = spec
    return np.abs(ifft2_centered(out))


# Cubic convolution kernel with a = -0.5 (Catmull-Rom).
def _cubic_kernel(t: np.ndarray) -> np.ndarray:
    at = np.abs(t)
    near = (1.5 * at - 2.5) * at * at + 1.0
    far = ((-0.5 * at + 2.5) * at - 4.0) * at + 2.0
    return np.where(at <= 1.0, near, np.where(at < 2.0, far, 0.0))


def _resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) operator for one axis: pixel-center
    aligned source coordinates, 4-tap cubic weights, edges clamped."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(np.int64)
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for offset in (-1, 0, 1, 2):
        tap = base + offset
        weight = _cubic_kernel(src - tap)
        np.add.at(mat, (rows, np.clip(tap, 0, n_in - 1)), weight)
    return mat


def bicubic_resample(slice_: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable Catmull-Rom resampling with edge clamping; output clipped
    to [0, 1]."""
    a = validate_slice(slice_)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"bad output size {out_h}x{out_w}")
    wr = _resample_matrix(a.shape[0], out_h)
    wc = _resample_matrix(a.shape[1], out_w)
    return np.clip(wr @ a @ wc.T, 0.0, 1.0)


def _zero_filled(img: np.ndarray, mask: Mask) -> np.ndarray:
    # a complete mask acquires everything: the exact result is the image
    # itself, so skip the transform pair and its last-ulp noise
    if mask.bits.all():
        return np.abs(img)
    return np.abs(ifft2_centered(apply_mask(fft2_centered(img), mask)))


def degrade(slice_: np.ndarray, spec: DegradeSpec) -> np.ndarray:
    """Run one acquisition path.

    Output matches the post-downscale geometry, or the source geometry
    when ``recon`` is ``zero_filled_plus_bicubic``.
    """
    a = validate_slice(slice_)
    h, w = a.shape
    spec.validate(h, w)
    if spec.path == "undersample":
        out = _zero_filled(a, spec.mask)
    elif spec.path == "lowres":
        out = kspace_downscale(a, spec.downscale)
    else:  # combined
        out = _zero_filled(kspace_downscale(a, spec.downscale), spec.mask)
    if spec.recon == "zero_filled_plus_bicubic" and out.shape != (h, w):
        out = bicubic_resample(out, h, w)
    return out
