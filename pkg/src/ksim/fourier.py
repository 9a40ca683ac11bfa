"""Centered, orthonormal 2D Fourier transforms.

Convention used throughout the toolkit: the forward transform is the
standard 2D DFT with unitary (1/sqrt(H*W)) scaling, followed by a centering
shift that puts the DC bin at (H//2, W//2).  Under this scaling Parseval
holds exactly and the DC bin of an image equals mean(pixels) * sqrt(H*W).

``dft2_direct`` evaluates the same transform from its defining double sum
(no FFT machinery shared) and serves as the verification oracle for small
sizes.
"""

from __future__ import annotations

import numpy as np

from ksim.imgio import validate_slice

_DFT_DIRECT_LIMIT = 64


def fft2_centered(slice_: np.ndarray) -> np.ndarray:
    """Forward transform: image -> centered k-space (complex128)."""
    a = validate_slice(slice_)
    return np.fft.fftshift(np.fft.fft2(a, norm="ortho"))


def ifft2_centered(spectrum: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2_centered`.  Returns the complex image; the
    caller decides whether to take the real part or the magnitude."""
    s = np.asarray(spectrum, dtype=np.complex128)
    if s.ndim != 2:
        raise ValueError(f"spectrum must be 2D, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("spectrum contains non-finite values")
    return np.fft.ifft2(np.fft.ifftshift(s), norm="ortho")


def dft2_direct(slice_: np.ndarray) -> np.ndarray:
    """Centered unitary DFT evaluated by the defining double sum.

    Quadratic in the pixel count, so sizes are capped at
    64x64; intended as an independent oracle for :func:`fft2_centered`.
    """
    a = validate_slice(slice_)
    h, w = a.shape
    if h > _DFT_DIRECT_LIMIT or w > _DFT_DIRECT_LIMIT:
        raise ValueError(f"dft2_direct limited to {_DFT_DIRECT_LIMIT}^2, got {h}x{w}")
    ky = np.arange(h) - h // 2
    kx = np.arange(w) - w // 2
    m = np.arange(h)
    n = np.arange(w)
    eh = np.exp(-2j * np.pi * np.outer(ky, m) / h)
    ew = np.exp(-2j * np.pi * np.outer(kx, n) / w)
    return eh @ a.astype(np.complex128) @ ew.T / np.sqrt(h * w)
