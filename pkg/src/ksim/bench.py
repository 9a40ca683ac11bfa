"""Benchmark harness: sweep patterns x accelerations over a slice corpus.

For every (pattern, acceleration) cell one mask is generated (deterministic
given the config) and applied to every slice; MSE/PSNR/SSIM against the
ground truth are aggregated as mu +/- sigma.  Output is a CSV with a
``#``-prefixed metadata block (config echo, mask hashes, read/skip counts)
plus, by default, rendered curve figures alongside.

Slices within a cell may be scored in parallel (``KSIM_THREADS`` caps the
pool; 0 or unset means auto).  Results are slotted by slice index and
reduced in a fixed order, so the CSV bytes never depend on scheduling.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ksim import __version__
from ksim.imgio import FormatError, make_phantom, read_slice
from ksim.masks import (
    FractionBelowCenter,
    Mask,
    accel_to_fraction,
    make_mask,
    mask_to_pbm_bytes,
    total_accel,
)
from ksim.metrics import SsimParams, aggregate, evaluate
from ksim.normalize import DegenerateRange, normalize_histogram, normalize_percentile
from ksim.pipeline import DegradeSpec, degrade

log = logging.getLogger("ksim.bench")

CSV_HEADER = "pattern,fraction,total_acceleration,path,metric,mean,std,n"
_METRICS = ("mse", "psnr", "ssim")


@dataclass
class BenchConfig:
    corpus: str
    patterns: tuple[str, ...] = ("fastmri", "radial", "spiral")
    accelerations: tuple[int, ...] = (2, 4, 8)
    downscale: int = 1
    path: str = "undersample"
    normalization: str = "none"  # none | percentile | histogram
    ssim_mode: str = "global"
    seed: int = 0
    output: str = "bench.csv"
    figures: bool = True
    per_slice_seed: bool = False  # fresh fastmri mask per slice

    def validate(self) -> None:
        if self.downscale not in (1, 2, 4):
            raise ValueError(f"downscale must be 1, 2, or 4, got {self.downscale}")
        if self.path not in ("undersample", "lowres", "combined"):
            raise ValueError(f"unknown bench path {self.path!r}")
        if self.path == "undersample" and self.downscale != 1:
            raise ValueError("undersample path requires downscale 1")
        if self.normalization not in ("none", "percentile", "histogram"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.ssim_mode not in ("global", "windowed"):
            raise ValueError(f"unknown ssim mode {self.ssim_mode!r}")
        for a in self.accelerations:
            if a < 1:
                raise ValueError(f"bad acceleration {a}")

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown bench config keys: {sorted(unknown)}")
        doc = dict(doc)
        for key in ("patterns", "accelerations"):
            if key in doc:
                doc[key] = tuple(doc[key])
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: str | Path) -> "BenchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class BenchRow:
    pattern: str
    fraction: float  # of k-space kept overall (1 / total acceleration)
    total_acceleration: int
    path: str
    metric: str
    mean: float
    std: float
    n: int


@dataclass
class BenchResult:
    rows: list[BenchRow]
    slices_read: int
    slices_skipped: int
    notes: list[str] = field(default_factory=list)
    mask_hashes: dict[str, str] = field(default_factory=dict)


def _worker_count() -> int:
    env = os.environ.get("KSIM_THREADS", "").strip()
    if env and env != "0":
        return max(1, int(env))
    return os.cpu_count() or 1


def load_corpus(corpus: str) -> tuple[list[tuple[str, np.ndarray]], int]:
    """Load a corpus: either ``phantom:<kind>:<size>`` or a directory of
    .pgm/.ksim slices (sorted by name).  Returns (slices, skipped)."""
    if corpus.startswith("phantom:"):
        parts = corpus.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad phantom corpus spec {corpus!r}")
        kind, size = parts[1], int(parts[2])
        return [(corpus, make_phantom(kind, size))], 0
    root = Path(corpus)
    if not root.is_dir():
        raise ValueError(f"corpus directory {corpus!r} does not exist")
    slices: list[tuple[str, np.ndarray]] = []
    skipped = 0
    for p in sorted(root.iterdir()):
        if p.suffix.lower() not in (".pgm", ".ksim"):
            continue
        try:
            slices.append((p.name, read_slice(p)))
        except (FormatError, ValueError, OSError) as exc:
            log.warning("skipping unreadable slice %s: %s", p, exc)
            skipped += 1
    if not slices and skipped == 0:
        raise ValueError(f"corpus {corpus!r} holds no readable slices")
    return slices, skipped


def _normalize_corpus(
    slices: list[tuple[str, np.ndarray]], method: str
) -> tuple[list[tuple[str, np.ndarray]], int]:
    if method == "none":
        return slices, 0
    out = []
    skipped = 0
    for name, arr in slices:
        try:
            if method == "percentile":
                out.append((name, normalize_percentile(arr)))
            else:
                normed, _, _ = normalize_histogram(arr)
                out.append((name, normed))
        except DegenerateRange as exc:
            log.warning("normalization skipped slice %s: %s", name, exc)
            skipped += 1
    return out, skipped


def _cell_mask(cfg: BenchConfig, pattern: str, accel: int, shape: tuple[int, int], slice_idx: int | None) -> Mask:
    h = shape[0] // cfg.downscale
    w = shape[1] // cfg.downscale
    seed = cfg.seed
    if slice_idx is not None:
        seed = (cfg.seed * 1000003 + slice_idx) % (1 << 64)
    return make_mask(pattern, h, w, accel_to_fraction(accel), seed=seed)


def _score_cell(
    cfg: BenchConfig,
    slices: list[tuple[str, np.ndarray]],
    pattern: str,
    accel: int,
    mask: Mask | None,
    workers: int,
) -> dict[str, list[float]]:
    recon = "zero_filled" if cfg.downscale == 1 else "zero_filled_plus_bicubic"
    params = SsimParams(mode=cfg.ssim_mode)

    def one(idx: int) -> tuple[float, float, float]:
        _, gt = slices[idx]
        m = mask
        if cfg.path != "lowres" and m is None:
            m = _cell_mask(cfg, pattern, accel, gt.shape, idx)
        spec = DegradeSpec(path=cfg.path, downscale=cfg.downscale, mask=m, recon=recon)
        report = evaluate(gt, degrade(gt, spec), params)
        return report.mse, report.psnr, report.ssim

    results: list[tuple[float, float, float]] = [None] * len(slices)  # type: ignore[list-item]
    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, triple in enumerate(pool.map(one, range(len(slices)))):
                results[idx] = triple
    else:
        for idx in range(len(slices)):
            results[idx] = one(idx)
    return {name: [r[i] for r in results] for i, name in enumerate(_METRICS)}


def _run(cfg: BenchConfig) -> BenchResult:
    cfg.validate()
    raw, skipped_read = load_corpus(cfg.corpus)
    slices, skipped_norm = _normalize_corpus(raw, cfg.normalization)
    skipped_shape = 0
    if slices:
        shape = slices[0][1].shape
        kept = [(n, a) for n, a in slices if a.shape == shape]
        skipped_shape = len(slices) - len(kept)
        if skipped_shape:
            log.warning("skipping %d slices whose shape differs from %s", skipped_shape, shape)
        slices = kept
    workers = _worker_count()

    result = BenchResult(
        rows=[],
        slices_read=len(slices),
        slices_skipped=skipped_read + skipped_norm + skipped_shape,
    )
    if skipped_shape:
        result.notes.append(f"{skipped_shape} slices dropped for shape mismatch")
    if not slices:
        result.notes.append("no usable slices after skips; nothing scored")
        return result
    shape = slices[0][1].shape

    if cfg.path == "lowres":
        # no mask: the sweep collapses to one low-resolution cell
        cells = [("lowres", 1)]
    else:
        cells = [(p, a) for p in cfg.patterns for a in sorted(cfg.accelerations)]

    for pattern, accel in cells:
        total = total_accel(cfg.downscale, accel)
        mask = None
        if cfg.path != "lowres":
            try:
                # probe even in per-slice mode so infeasible cells are
                # excluded up front rather than mid-pool
                probe = _cell_mask(cfg, pattern, accel, shape, 0 if cfg.per_slice_seed else None)
                if not (cfg.per_slice_seed and pattern == "fastmri"):
                    mask = probe
                    key = f"{pattern} accel={accel}"
                    result.mask_hashes[key] = hashlib.sha256(
                        mask_to_pbm_bytes(mask)
                    ).hexdigest()
            except FractionBelowCenter as exc:
                note = f"pattern {pattern} excluded at accel {accel}: FractionBelowCenter ({exc})"
                log.info(note)
                result.notes.append(note)
                continue
        values = _score_cell(cfg, slices, pattern, accel, mask, workers)
        for metric in _METRICS:
            agg = aggregate(values[metric])
            result.rows.append(
                BenchRow(
                    pattern=pattern,
                    fraction=1.0 / total,
                    total_acceleration=total,
                    path=cfg.path,
                    metric=metric,
                    mean=agg.mean,
                    std=agg.std,
                    n=agg.n,
                )
            )
    metric_rank = {m: i for i, m in enumerate(_METRICS)}
    result.rows.sort(key=lambda r: (r.pattern, -r.fraction, metric_rank[r.metric]))
    return result


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _row_cells(r: BenchRow) -> list[str]:
    return [
        r.pattern,
        _fmt(r.fraction),
        str(r.total_acceleration),
        r.path,
        r.metric,
        _fmt(r.mean),
        _fmt(r.std),
        str(r.n),
    ]


def _csv_lines(cfg: BenchConfig, result: BenchResult) -> list[str]:
    lines = [
        f"# ksim bench v{__version__}",
        f"# config {json.dumps(asdict(cfg), sort_keys=True)}",
        f"# slices_read={result.slices_read} slices_skipped={result.slices_skipped}",
    ]
    for key in sorted(result.mask_hashes):
        lines.append(f"# mask {key} sha256={result.mask_hashes[key]}")
    for note in result.notes:
        lines.append(f"# note: {note}")
    lines.append(CSV_HEADER)
    lines.extend(",".join(_row_cells(r)) for r in result.rows)
    return lines


def run_bench(cfg: BenchConfig) -> list[BenchRow]:
    """Run the sweep, write the CSV (and figures unless disabled), and
    return the rows."""
    result = _run(cfg)
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(_csv_lines(cfg, result)) + "\n")
    if cfg.figures and result.rows:
        from ksim import plotting

        plotting.render_curves(result.rows, out.with_name(out.stem + "_curves.png"))
    return result.rows


def compare_normalizations(
    cfg: BenchConfig, methods: tuple[str, ...] = ("percentile", "histogram")
) -> dict[str, list[BenchRow]]:
    """Run the identical sweep once per normalization method and write the
    side-by-side CSV (and a comparison figure).  No winner is asserted."""
    results: dict[str, BenchResult] = {}
    for method in methods:
        sub = BenchConfig(**{**asdict(cfg), "normalization": method})
        results[method] = _run(sub)
    lines = [
        f"# ksim bench v{__version__} normalization comparison",
        f"# config {json.dumps({**asdict(cfg), 'normalization': list(methods)}, sort_keys=True)}",
    ]
    for method in methods:
        r = results[method]
        lines.append(
            f"# arm {method}: slices_read={r.slices_read} slices_skipped={r.slices_skipped}"
        )
        lines.extend(f"# note [{method}]: {note}" for note in r.notes)
    lines.append(f"normalization,{CSV_HEADER}")
    for method in methods:
        lines.extend(",".join([method] + _row_cells(r)) for r in results[method].rows)
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    rows_by_method = {m: results[m].rows for m in methods}
    if cfg.figures and any(rows_by_method.values()):
        from ksim import plotting

        plotting.render_normalization_comparison(
            rows_by_method, out.with_name(out.stem + "_normalizations.png")
        )
    return rows_by_method
