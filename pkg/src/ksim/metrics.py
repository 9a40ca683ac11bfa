"""Image-quality metrics: MSE, PSNR, SSIM, and mu +/- sigma aggregation.

SSIM constants follow the usual stabilized form c1 = (k1*L)^2 and
c2 = (k2*L)^2 with k1 = 0.01, k2 = 0.03, and L the total intensity range
(1.0 for normalized slices).  Two modes are provided:

* ``global``: the formula applied once to whole-image statistics
  (population variance and covariance, divisor M*N).
* ``windowed``: the formula per pixel under a normalized 11x11 Gaussian
  window (sigma 1.5, symmetric edge handling), averaged over the positions
  where the window fits entirely inside the image.

PSNR of identical images is +inf (a legitimate value, serialized as
"inf"), never an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ksim.imgio import validate_slice


@dataclass
class SsimParams:
    k1: float = 0.01
    k2: float = 0.03
    L: float = 1.0
    mode: str = "global"
    window_size: int = 11
    window_sigma: float = 1.5
    window_kind: str = "gaussian"  # or "uniform"

    def validate(self) -> None:
        if self.k1 <= 0 or self.k2 <= 0 or self.L <= 0:
            raise ValueError("k1, k2, L must be positive")
        if self.mode not in ("global", "windowed"):
            raise ValueError(f"unknown ssim mode {self.mode!r}")
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise ValueError("window_size must be odd and >= 3")
        if self.window_kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown window kind {self.window_kind!r}")


@dataclass
class IQReport:
    mse: float
    psnr: float
    ssim: float
    ssim_mode: str = "global"


@dataclass
class Aggregate:
    mean: float
    std: float  # population (divisor n)
    n: int
    scale_hint: str = "raw"


def _pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = validate_slice(x), validate_slice(y)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(x: np.ndarray, y: np.ndarray) -> float:
    a, b = _pair(x, y)
    return float(np.mean((a - b) ** 2))


def psnr(x: np.ndarray, y: np.ndarray, max_value: float = 1.0) -> float:
    m = mse(x, y)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / m)


def _ssim_global(a: np.ndarray, b: np.ndarray, c1: float, c2: float) -> float:
    mu_x = np.mean(a)
    mu_y = np.mean(b)
    var_x = np.mean((a - mu_x) ** 2)
    var_y = np.mean((b - mu_y) ** 2)
    cov = np.mean((a - mu_x) * (b - mu_y))
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(num / den)


def _window(params: SsimParams) -> np.ndarray:
    n = params.window_size
    if params.window_kind == "uniform":
        return np.full((n, n), 1.0 / (n * n))
    d = np.arange(n) - n // 2
    g = np.exp(-(d**2) / (2.0 * params.window_sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_windowed(a: np.ndarray, b: np.ndarray, c1: float, c2: float, params: SsimParams) -> float:
    if min(a.shape) < params.window_size:
        raise ValueError(
            f"image {a.shape} smaller than ssim window {params.window_size}"
        )
    k = _window(params)

    def filt(img: np.ndarray) -> np.ndarray:
        return ndimage.correlate(img, k, mode="reflect")

    mu_x = filt(a)
    mu_y = filt(b)
    var_x = filt(a * a) - mu_x * mu_x
    var_y = filt(b * b) - mu_y * mu_y
    cov = filt(a * b) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    smap = num / den
    pad = params.window_size // 2
    return float(np.mean(smap[pad : a.shape[0] - pad, pad : a.shape[1] - pad]))


def ssim(x: np.ndarray, y: np.ndarray, params: SsimParams | None = None) -> float:
    p = params or SsimParams()
    p.validate()
    a, b = _pair(x, y)
    c1 = (p.k1 * p.L) ** 2
    c2 = (p.k2 * p.L) ** 2
    if p.mode == "global":
        return _ssim_global(a, b, c1, c2)
    return _ssim_windowed(a, b, c1, c2, p)


def evaluate(x: np.ndarray, y: np.ndarray, params: SsimParams | None = None) -> IQReport:
    """All three metrics for one reference/test pair."""
    p = params or SsimParams()
    return IQReport(mse=mse(x, y), psnr=psnr(x, y, p.L), ssim=ssim(x, y, p), ssim_mode=p.mode)


def aggregate(values: list[float], scale_hint: str = "raw") -> Aggregate:
    """Mean and population standard deviation (divisor n) of a metric.

    A list of identical values has std 0 even when the value is the +inf
    PSNR sentinel (inf - inf would otherwise poison the spread)."""
    if len(values) == 0:
        raise ValueError("cannot aggregate an empty list")
    arr = np.asarray(values, dtype=np.float64)
    if np.all(arr == arr[0]):
        return Aggregate(mean=float(arr[0]), std=0.0, n=len(values), scale_hint=scale_hint)
    return Aggregate(mean=float(arr.mean()), std=float(arr.std()), n=len(values), scale_hint=scale_hint)


def render_value(value: float, scale_hint: str = "raw") -> str:
    """Table-style rendering: MSE x 1e4 and SSIM x 1e2, two decimals."""
    if math.isinf(value):
        return "inf"
    if scale_hint == "mse_e4":
        return f"{value * 1e4:.2f}"
    if scale_hint == "ssim_e2":
        return f"{value * 1e2:.2f}"
    return f"{value:.2f}"


def render_aggregate(agg: Aggregate) -> str:
    return f"{render_value(agg.mean, agg.scale_hint)} ± {render_value(agg.std, agg.scale_hint)}"
