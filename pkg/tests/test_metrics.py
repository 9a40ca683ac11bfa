import math

import numpy as np
import pytest

from ksim import metrics


def naive_mse(x, y):
    h, w = x.shape
    acc = 0.0
    for i in range(h):
        for j in range(w):
            d = x[i, j] - y[i, j]
            acc += d * d
    return acc / (h * w)


def naive_psnr(x, y, max_value=1.0):
    m = naive_mse(x, y)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / m)


def naive_global_ssim(x, y, k1=0.01, k2=0.03, L=1.0):
    n = x.size
    mx = sum(x.ravel()) / n
    my = sum(y.ravel()) / n
    vx = sum((v - mx) ** 2 for v in x.ravel()) / n
    vy = sum((v - my) ** 2 for v in y.ravel()) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x.ravel(), y.ravel())) / n
    c1 = (k1 * L) ** 2
    c2 = (k2 * L) ** 2
    return (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def test_mse_examples():
    rng = np.random.default_rng(0)
    x = rng.random((16, 16))
    assert metrics.mse(x, x) == 0.0
    y = x + 0.1
    assert abs(metrics.mse(x, y) - 0.01) < 1e-15


def test_mse_matches_naive():
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.random((32, 32))
        y = rng.random((32, 32))
        ref = naive_mse(x, y)
        assert abs(metrics.mse(x, y) - ref) <= 1e-12 * ref


def test_psnr_arithmetic():
    x = np.zeros((4, 4))
    assert abs(metrics.psnr(x, np.full((4, 4), 0.1)) - 20.0) < 1e-12
    assert abs(metrics.psnr(x, np.full((4, 4), 0.01)) - 40.0) < 1e-12
    assert metrics.psnr(x, x) == math.inf


def test_psnr_decreases_with_mse():
    x = np.zeros((8, 8))
    values = [metrics.psnr(x, np.full((8, 8), eps)) for eps in (0.01, 0.02, 0.05, 0.2)]
    assert values == sorted(values, reverse=True)


def test_ssim_self_is_exactly_one():
    rng = np.random.default_rng(2)
    x = rng.random((24, 24))
    assert metrics.ssim(x, x) == 1.0
    assert metrics.ssim(x, x, metrics.SsimParams(mode="windowed")) == 1.0


def test_global_ssim_matches_naive():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.random((32, 32))
        y = rng.random((32, 32))
        assert abs(metrics.ssim(x, y) - naive_global_ssim(x, y)) <= 1e-12


def test_metric_symmetry():
    rng = np.random.default_rng(4)
    x = rng.random((16, 16))
    y = rng.random((16, 16))
    assert metrics.mse(x, y) == metrics.mse(y, x)
    assert abs(metrics.ssim(x, y) - metrics.ssim(y, x)) <= 1e-15


def test_ssim_upper_bound():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.random((12, 12))
        y = rng.random((12, 12))
        assert metrics.ssim(x, y) <= 1.0


def test_global_ssim_permutation_invariant():
    rng = np.random.default_rng(6)
    x = rng.random((16, 16))
    y = rng.random((16, 16))
    perm = rng.permutation(x.size)
    xp = x.ravel()[perm].reshape(16, 16)
    yp = y.ravel()[perm].reshape(16, 16)
    assert abs(metrics.ssim(x, y) - metrics.ssim(xp, yp)) <= 1e-12


def test_windowed_flat_whole_image_equals_global():
    rng = np.random.default_rng(7)
    x = rng.random((11, 11))
    y = rng.random((11, 11))
    params = metrics.SsimParams(mode="windowed", window_size=11, window_kind="uniform")
    assert abs(metrics.ssim(x, y, params) - metrics.ssim(x, y)) <= 1e-12


def test_windowed_gaussian_reasonable():
    rng = np.random.default_rng(8)
    x = rng.random((32, 32))
    y = np.clip(x + rng.normal(0, 0.05, x.shape), 0, 1)
    v = metrics.ssim(x, y, metrics.SsimParams(mode="windowed"))
    assert 0.0 < v < 1.0


def test_windowed_requires_window_fit():
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((8, 8)), np.zeros((8, 8)), metrics.SsimParams(mode="windowed"))


def test_param_validation():
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((4, 4)), np.zeros((4, 4)), metrics.SsimParams(k1=-1))
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((4, 4)), np.zeros((4, 4)), metrics.SsimParams(window_size=4, mode="windowed"))
    with pytest.raises(ValueError):
        metrics.mse(np.zeros((4, 4)), np.zeros((4, 5)))


def test_evaluate_report():
    rng = np.random.default_rng(9)
    x = rng.random((16, 16))
    rep = metrics.evaluate(x, x)
    assert rep.mse == 0.0 and rep.psnr == math.inf and rep.ssim == 1.0
    assert rep.ssim_mode == "global"


def test_aggregate():
    a = metrics.aggregate([1.0, 1.0, 1.0])
    assert (a.mean, a.std, a.n) == (1.0, 0.0, 3)
    b = metrics.aggregate([0.0, 2.0])
    assert (b.mean, b.std) == (1.0, 1.0)  # population std
    with pytest.raises(ValueError):
        metrics.aggregate([])


def test_render_scale_hints():
    assert metrics.render_value(0.001439, "mse_e4") == "14.39"
    assert metrics.render_value(0.9402, "ssim_e2") == "94.02"
    assert metrics.render_value(28.526, "raw") == "28.53"
    assert metrics.render_value(math.inf) == "inf"
    agg = metrics.aggregate([0.001439], scale_hint="mse_e4")
    assert metrics.render_aggregate(agg) == "14.39 ± 0.00"
