"""Intensity normalization: percentile min-max and histogram-based.

The percentile method rescales between the 2nd and 98th intensity
percentiles and clips to [0, 1].

The histogram method fits a 15th-order polynomial to the (max-rescaled)
intensity histogram, locates the first minimum m and the first maximum M
above it from the fitted derivative's zero crossings, then min-max
normalizes to a window of width alpha * (M - m) centered on M.  Slices
whose fitted histogram has no usable (m, M) pair fall back to the
percentile method with an explicit flag.

Both maps are monotone non-decreasing and land in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from ksim.imgio import validate_slice

_EXTREMA_GRID = 4096
_BISECT_TOL = 1e-10


class DegenerateRange(Exception):
    """Intensity spread is empty (constant or near-constant slice)."""


@dataclass
class PolyFit:
    """Least-squares monomial fit over the domain rescaled to [-1, 1]."""

    degree: int
    coeffs: np.ndarray  # ascending powers, length degree + 1
    domain: tuple[float, float]

    def to_unit(self, v: np.ndarray | float) -> np.ndarray | float:
        lo, hi = self.domain
        return 2.0 * (np.asarray(v) - lo) / (hi - lo) - 1.0

    def from_unit(self, t: np.ndarray | float) -> np.ndarray | float:
        lo, hi = self.domain
        return lo + (np.asarray(t) + 1.0) * (hi - lo) / 2.0

    def __call__(self, v: np.ndarray | float) -> np.ndarray | float:
        return npoly.polyval(self.to_unit(v), self.coeffs)


@dataclass
class HistogramNormParams:
    bin_count: int = 256
    poly_degree: int = 15
    alpha: float = 5.0
    m_intensity: float = float("nan")
    M_intensity: float = float("nan")
    width: float = float("nan")
    delta: float = float("nan")
    # fitted-histogram rise (value at M minus value at m) required for an
    # extrema pair to count as real structure rather than fit wiggle
    min_rise: float = 0.05


def normalize_percentile(slice_: np.ndarray, p_lo: float = 2.0, p_hi: float = 98.0) -> np.ndarray:
    """Min-max normalization between two percentiles, clipped to [0, 1].

    Percentiles use linear interpolation between order statistics.
    """
    a = validate_slice(slice_)
    lo, hi = np.percentile(a, [p_lo, p_hi])
    if hi <= lo:
        raise DegenerateRange(f"percentile range is empty: p{p_lo}={lo}, p{p_hi}={hi}")
    return np.clip((a - lo) / (hi - lo), 0.0, 1.0)


def fit_histogram_poly(slice_: np.ndarray, bin_count: int = 256, degree: int = 15) -> PolyFit:
    """Fit a polynomial to the slice's intensity histogram.

    Counts are taken over [min, max] in ``bin_count`` uniform bins and
    rescaled so the tallest bin is 1.  The fit is solved on bin centers
    mapped to [-1, 1] via an orthogonal factorization (never the normal
    equations), which keeps degree-15 monomial fitting well conditioned.
    """
    a = validate_slice(slice_)
    if bin_count <= degree:
        raise ValueError(f"bin_count {bin_count} must exceed degree {degree}")
    lo, hi = float(a.min()), float(a.max())
    if hi <= lo:
        raise DegenerateRange("constant slice has a zero-width histogram domain")
    counts, edges = np.histogram(a, bins=bin_count, range=(lo, hi))
    scaled = counts / counts.max()
    centers = 0.5 * (edges[:-1] + edges[1:])
    t = 2.0 * (centers - lo) / (hi - lo) - 1.0
    vander = npoly.polyvander(t, degree)
    coeffs, *_ = np.linalg.lstsq(vander, scaled, rcond=None)
    return PolyFit(degree=degree, coeffs=coeffs, domain=(lo, hi))


def find_extrema(fit: PolyFit) -> list[tuple[float, str]]:
    """Locate the fit's interior extrema, sorted by intensity.

    The derivative is sampled on a uniform grid over the domain; each sign
    change is bracketed and refined by bisection (to 1e-10 in the rescaled
    coordinate) and classified as ``min`` (- to +) or ``max`` (+ to -).
    """
    dcoeffs = npoly.polyder(fit.coeffs)
    t = np.linspace(-1.0, 1.0, _EXTREMA_GRID)
    d = npoly.polyval(t, dcoeffs)
    out: list[tuple[float, str]] = []
    for i in np.nonzero(d[:-1] * d[1:] < 0)[0]:
        a, b = t[i], t[i + 1]
        fa = d[i]
        while b - a > _BISECT_TOL:
            mid = 0.5 * (a + b)
            fm = npoly.polyval(mid, dcoeffs)
            if fa * fm <= 0:
                b = mid
            else:
                a, fa = mid, fm
        root = 0.5 * (a + b)
        kind = "min" if d[i] < 0 else "max"
        out.append((float(fit.from_unit(root)), kind))
    # exact zeros on grid points are vanishingly rare but cheap to honor
    for i in np.nonzero(d == 0)[0]:
        if 0 < i < len(t) - 1 and d[i - 1] * d[i + 1] < 0:
            kind = "min" if d[i - 1] < 0 else "max"
            out.append((float(fit.from_unit(t[i])), kind))
    out.sort(key=lambda e: e[0])
    return out


def _select_window(
    fit: PolyFit, extrema: list[tuple[float, str]], min_rise: float
) -> tuple[float, float] | None:
    """First (m, M) pair, in intensity order, whose fitted rise is real."""
    minima = [v for v, kind in extrema if kind == "min"]
    maxima = [v for v, kind in extrema if kind == "max"]
    for m in minima:
        for big in maxima:
            if big > m and float(fit(big)) - float(fit(m)) >= min_rise:
                return m, big
    return None


def normalize_histogram(
    slice_: np.ndarray,
    bin_count: int = 256,
    degree: int = 15,
    alpha: float = 5.0,
    min_rise: float = 0.05,
) -> tuple[np.ndarray, HistogramNormParams, bool]:
    """Histogram-based normalization; returns (slice, fitted params, fallback).

    ``fallback`` is True when no extrema pair exists (e.g. a monotone
    histogram) and the result came from :func:`normalize_percentile`
    instead; a constant slice raises :class:`DegenerateRange` either way.
    """
    a = validate_slice(slice_)
    params = HistogramNormParams(
        bin_count=bin_count, poly_degree=degree, alpha=alpha, min_rise=min_rise
    )
    pair = None
    try:
        fit = fit_histogram_poly(a, bin_count=bin_count, degree=degree)
        pair = _select_window(fit, find_extrema(fit), min_rise)
    except DegenerateRange:
        pass
    if pair is None:
        return normalize_percentile(a), params, True
    m, big = pair
    delta = big - m
    w = alpha * delta
    lo = big - w / 2.0
    params.m_intensity = m
    params.M_intensity = big
    params.delta = delta
    params.width = w
    return np.clip((a - lo) / w, 0.0, 1.0), params, False
