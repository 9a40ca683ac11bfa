"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest -s tests/test_acceptance.py`` to see
them).  Tolerances and runtime budgets are pinned here, not configurable.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from ksim import fourier, imgio, masks, metrics, normalize, pipeline
from ksim.bench import BenchConfig, run_bench


@contextmanager
def criterion(number, label, budget_s=None):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} {label}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    if budget_s is not None and elapsed > budget_s:
        print(f"ACCEPTANCE {number} {label}: FAIL (runtime {elapsed:.1f}s > {budget_s}s)")
        raise AssertionError(f"criterion {number} exceeded runtime budget")
    print(f"ACCEPTANCE {number} {label}: PASS ({elapsed:.2f}s)")


def test_criterion_1_fft_oracle_equivalence():
    with criterion(1, "fft oracle equivalence", budget_s=5.0):
        rng = np.random.default_rng(2024)
        for i in range(50):
            h = int(rng.integers(8, 33))
            w = int(rng.integers(8, 33))
            x = rng.random((h, w))
            fast = fourier.fft2_centered(x)
            direct = fourier.dft2_direct(x)
            scale = np.max(np.abs(direct))
            assert np.max(np.abs(fast - direct)) <= 1e-9 * scale
            e_img = np.sum(x**2)
            e_spec = np.sum(np.abs(fast) ** 2)
            assert abs(e_img - e_spec) <= 1e-10 * e_img


def test_criterion_2_exact_mask_fractions():
    with criterion(2, "exact mask fractions", budget_s=10.0):
        fractions = {2: 0.5, 4: 0.25, 8: 0.125, 16: 0.0625, 32: 0.03125, 64: 0.015625}
        for size in (64, 128, 320):
            for accel, frac in fractions.items():
                assert masks.accel_to_fraction(accel) == frac
                target = round(frac * size * size)
                assert masks.make_radial_mask(size, size, frac).popcount() == target
                assert masks.make_spiral_mask(size, size, frac).popcount() == target
        for size in (64, 128, 320):
            n_center = math.floor(0.08 * size + 0.5)
            for accel in (2, 4, 8):
                m = masks.make_fastmri_mask(size, size, fractions[accel], seed=1)
                cols = np.all(m.bits, axis=0)
                assert cols.sum() == math.floor(fractions[accel] * size + 0.5)
                pad = (size - n_center + 1) // 2
                assert m.bits[:, pad : pad + n_center].all()
                assert cols[:pad].sum() + cols[pad + n_center :].sum() == cols.sum() - n_center
        for accel in (16, 32, 64):
            with pytest.raises(masks.FractionBelowCenter):
                masks.make_fastmri_mask(320, 320, fractions[accel])


def test_criterion_3_metric_oracles():
    with criterion(3, "metric oracles", budget_s=5.0):
        params = metrics.SsimParams()
        assert (params.k1, params.k2, params.L) == (0.01, 0.03, 1.0)
        c1, c2 = (params.k1 * params.L) ** 2, (params.k2 * params.L) ** 2
        rng = np.random.default_rng(7)
        for i in range(100):
            x = rng.random((32, 32))
            y = rng.random((32, 32))
            diff = (x - y).ravel()
            ref_mse = float(sum(d * d for d in diff) / diff.size)
            got_mse = metrics.mse(x, y)
            assert abs(got_mse - ref_mse) <= 1e-12 * ref_mse
            ref_psnr = 10.0 * math.log10(1.0 / ref_mse)
            assert abs(metrics.psnr(x, y) - ref_psnr) <= 1e-12 * abs(ref_psnr)
            n = x.size
            mx = float(sum(x.ravel())) / n
            my = float(sum(y.ravel())) / n
            vx = float(sum((v - mx) ** 2 for v in x.ravel())) / n
            vy = float(sum((v - my) ** 2 for v in y.ravel())) / n
            cov = float(sum((a - mx) * (b - my) for a, b in zip(x.ravel(), y.ravel()))) / n
            ref_ssim = ((2 * mx * my + c1) * (2 * cov + c2)) / (
                (mx * mx + my * my + c1) * (vx + vy + c2)
            )
            assert abs(metrics.ssim(x, y) - ref_ssim) <= 1e-12
        x = rng.random((32, 32))
        assert metrics.ssim(x, x) == 1.0
        assert metrics.psnr(x, x) == math.inf


def test_criterion_4_identity_degradation():
    with criterion(4, "identity degradation"):
        x = imgio.make_phantom("shepp_logan", 128)
        spec = pipeline.DegradeSpec(path="undersample", mask=masks.make_full_mask(128, 128))
        assert np.max(np.abs(pipeline.degrade(x, spec) - x)) <= 1e-10
        const = np.full((128, 128), 0.375)
        assert np.max(np.abs(pipeline.kspace_downscale(const, 2) - 0.375)) <= 1e-12
        assert np.max(np.abs(pipeline.kspace_upscale(const, 2) - 0.375)) <= 1e-12


def test_criterion_5_monotone_degradation_curve():
    with criterion(5, "monotone degradation curve", budget_s=30.0):
        x = imgio.make_phantom("shepp_logan", 320)
        fractions = (0.5, 0.25, 0.125, 0.0625, 0.03125)
        for pattern in ("radial", "spiral"):
            values = []
            for frac in fractions:
                m = masks.make_mask(pattern, 320, 320, frac)
                out = pipeline.degrade(x, pipeline.DegradeSpec(path="undersample", mask=m))
                values.append(metrics.ssim(out, x))
            for better, worse in zip(values, values[1:]):
                assert worse <= better + 1e-3, (pattern, values)


def test_criterion_6_total_acceleration_bookkeeping(tmp_path):
    with criterion(6, "total-acceleration bookkeeping"):
        cfg = BenchConfig(
            corpus="phantom:shepp_logan:64",
            patterns=("radial",),
            accelerations=(2, 4, 8),
            path="combined",
            downscale=2,
            output=str(tmp_path / "totals.csv"),
            figures=False,
        )
        rows = run_bench(cfg)
        assert sorted({r.total_acceleration for r in rows}) == [8, 16, 32]
        assert {masks.total_accel(2, a) for a in (2, 4, 8)} == {8, 16, 32}
        for r in rows:
            assert r.fraction == 1.0 / r.total_acceleration


def test_criterion_7_normalization():
    with criterion(7, "normalization", budget_s=5.0):
        rng = np.random.default_rng(11)
        for _ in range(10):
            x = rng.standard_normal((24, 24))
            v = np.sort(x.ravel())
            rank_lo, rank_hi = 0.02 * (v.size - 1), 0.98 * (v.size - 1)
            ilo, ihi = int(math.floor(rank_lo)), int(math.floor(rank_hi))
            p2 = v[ilo] + (rank_lo - ilo) * (v[ilo + 1] - v[ilo])
            p98 = v[ihi] + (rank_hi - ihi) * (v[ihi + 1] - v[ihi])
            expect = np.clip((x - p2) / (p98 - p2), 0.0, 1.0)
            got = normalize.normalize_percentile(x)
            assert np.max(np.abs(got - expect)) <= 1e-12
        phantom = imgio.make_phantom("bimodal_field", 320)
        out, params, fallback = normalize.normalize_histogram(phantom)
        assert not fallback
        assert params.alpha == 5.0
        bin_width = (phantom.max() - phantom.min()) / params.bin_count
        assert abs(params.M_intensity - 0.6) <= 2 * bin_width
        assert out.min() >= 0.0 and out.max() <= 1.0
        _, _, ramp_fallback = normalize.normalize_histogram(imgio.make_phantom("ramp", 64))
        assert ramp_fallback


def test_criterion_8_bench_determinism(tmp_path, monkeypatch):
    with criterion(8, "bench determinism"):
        monkeypatch.setenv("KSIM_THREADS", str(max(8, (__import__('os').cpu_count() or 1))))
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        rng = np.random.default_rng(5)
        for i in range(8):
            imgio.write_slice(rng.random((48, 48)), corpus / f"s{i}.ksim")
        outputs = []
        for name in ("one.csv", "two.csv"):
            cfg = BenchConfig(
                corpus=str(corpus),
                patterns=("fastmri", "radial", "spiral"),
                accelerations=(2, 4),
                normalization="percentile",
                output=str(tmp_path / name),
                figures=False,
            )
            run_bench(cfg)
            text = (tmp_path / name).read_text()
            outputs.append(text.replace(name, "OUT"))
        assert outputs[0] == outputs[1]
