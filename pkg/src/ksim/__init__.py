"""K-space undersampling simulation toolkit.

Grayscale 2D slices move through a small set of composable stages:
synthetic phantoms or PGM/KSIM files in, centered Fourier transforms,
sampling-mask generation (cartesian columns, radial spokes, spiral arms),
zero-filled and bicubic reconstructions, intensity normalization, and
MSE/PSNR/SSIM scoring with a sweep harness on top.
"""

__version__ = "0.1.0"

from ksim.fourier import dft2_direct, fft2_centered, ifft2_centered
from ksim.imgio import make_phantom, read_slice, write_slice
from ksim.masks import (
    Mask,
    MaskMeta,
    accel_to_fraction,
    make_fastmri_mask,
    make_full_mask,
    make_radial_mask,
    make_spiral_mask,
    read_mask,
    total_accel,
    write_mask,
)
from ksim.metrics import Aggregate, IQReport, SsimParams, aggregate, evaluate, mse, psnr, ssim
from ksim.normalize import (
    HistogramNormParams,
    PolyFit,
    find_extrema,
    fit_histogram_poly,
    normalize_histogram,
    normalize_percentile,
)
from ksim.pipeline import (
    DegradeSpec,
    apply_mask,
    bicubic_resample,
    degrade,
    kspace_downscale,
    kspace_upscale,
)

__all__ = [
    "Aggregate",
    "DegradeSpec",
    "HistogramNormParams",
    "IQReport",
    "Mask",
    "MaskMeta",
    "PolyFit",
    "SsimParams",
    "accel_to_fraction",
    "aggregate",
    "apply_mask",
    "bicubic_resample",
    "degrade",
    "dft2_direct",
    "evaluate",
    "fft2_centered",
    "find_extrema",
    "fit_histogram_poly",
    "ifft2_centered",
    "kspace_downscale",
    "kspace_upscale",
    "make_fastmri_mask",
    "make_full_mask",
    "make_phantom",
    "make_radial_mask",
    "make_spiral_mask",
    "mse",
    "normalize_histogram",
    "normalize_percentile",
    "psnr",
    "read_mask",
    "read_slice",
    "ssim",
    "total_accel",
    "write_mask",
    "write_slice",
]
