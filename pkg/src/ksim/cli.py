"""Command-line front door.

Every capability is a subcommand with stable flags.  Exit codes: 0 on
success, 1 on usage errors, 2 on runtime or data errors (the error class
name is printed to stderr).  Each run prints one machine-parseable result
line to stdout or writes its declared output file (with a ``wrote`` line).
"""

from __future__ import annotations

import argparse
import sys

from ksim import __version__
from ksim.bench import BenchConfig, compare_normalizations, run_bench
from ksim.imgio import make_phantom, read_slice, write_slice
from ksim.masks import accel_to_fraction, make_mask, read_mask, write_mask
from ksim.metrics import SsimParams, evaluate
from ksim.normalize import normalize_histogram, normalize_percentile
from ksim.pipeline import DegradeSpec, degrade

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _norm_token(value: str) -> str:
    return value.replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ksim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ksim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic slice")
    p.add_argument("--kind", required=True, choices=["shepp-logan", "bimodal-field", "ramp"])
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-mask", help="generate a sampling mask")
    p.add_argument("--pattern", required=True, choices=["fastmri", "radial", "spiral"])
    p.add_argument("--size", type=int, help="square geometry")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--accel", type=int, help="acceleration factor (fraction = 1/accel)")
    group.add_argument("--fraction", type=float, help="fraction of k-space to sample")
    p.add_argument("--center-fraction", type=float, default=0.08)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--angle-offset", type=float, default=0.0)
    p.add_argument("--arms", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("degrade", help="run one acquisition path on a slice")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--mask")
    p.add_argument("--path", required=True, choices=["undersample", "lowres", "combined"])
    p.add_argument("--downscale", type=int, default=1)
    p.add_argument(
        "--recon",
        default="zero-filled",
        choices=["zero-filled", "zero-filled-plus-bicubic", "none"],
    )
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", help="score a test slice against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--ssim-mode", default="global", choices=["global", "windowed"])

    p = sub.add_parser("normalize", help="normalize slice intensities")
    p.add_argument("--method", required=True, choices=["percentile", "histogram"])
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--degree", type=int, default=15)
    p.add_argument("--alpha", type=float, default=5.0)

    p = sub.add_parser("bench", help="run a benchmark sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument(
        "--compare-normalizations",
        action="store_true",
        help="run the sweep once per normalization method, side by side",
    )

    return parser


def _cmd_phantom(args: argparse.Namespace) -> int:
    img = make_phantom(_norm_token(args.kind), args.size)
    write_slice(img, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_gen_mask(args: argparse.Namespace) -> int:
    height = args.height or args.size
    width = args.width or args.size
    if height is None or width is None:
        print("gen-mask: provide --size or both --height and --width", file=sys.stderr)
        return USAGE_ERROR
    fraction = args.fraction if args.fraction is not None else accel_to_fraction(args.accel)
    mask = make_mask(
        args.pattern,
        height,
        width,
        fraction,
        seed=args.seed,
        center_fraction=args.center_fraction,
        angle_offset=args.angle_offset,
        arm_count=args.arms,
    )
    write_mask(mask, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_degrade(args: argparse.Namespace) -> int:
    img = read_slice(args.inp)
    mask = read_mask(args.mask) if args.mask else None
    spec = DegradeSpec(
        path=args.path,
        downscale=args.downscale,
        mask=mask,
        recon=_norm_token(args.recon),
    )
    write_slice(degrade(img, spec), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    ref = read_slice(args.ref)
    test = read_slice(args.test)
    report = evaluate(ref, test, SsimParams(mode=args.ssim_mode))
    print(f"mse={_fmt(report.mse)} psnr={_fmt(report.psnr)} ssim={_fmt(report.ssim)}")
    return 0


def _cmd_normalize(args: argparse.Namespace) -> int:
    img = read_slice(args.inp)
    if args.method == "percentile":
        out = normalize_percentile(img)
        fallback = False
    else:
        out, _, fallback = normalize_histogram(
            img, bin_count=args.bins, degree=args.degree, alpha=args.alpha
        )
    write_slice(out, args.out)
    print(f"method={args.method} fallback={'true' if fallback else 'false'} wrote={args.out}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = BenchConfig.from_json(args.config)
    if args.no_figures:
        cfg.figures = False
    if args.compare_normalizations:
        compare_normalizations(cfg)
    else:
        run_bench(cfg)
    print(f"wrote {cfg.output}")
    return 0


_COMMANDS = {
    "phantom": _cmd_phantom,
    "gen-mask": _cmd_gen_mask,
    "degrade": _cmd_degrade,
    "metrics": _cmd_metrics,
    "normalize": _cmd_normalize,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # domain and I/O failures share one contract
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
