import hashlib
import json

import numpy as np
import pytest

from ksim import imgio, masks
from ksim.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def phantom_file(tmp_path):
    p = tmp_path / "p.pgm"
    imgio.write_slice(imgio.make_phantom("shepp_logan", 64), p)
    return p


def test_phantom_subcommand(tmp_path, capsys):
    out = tmp_path / "p.pgm"
    code, stdout, _ = run(capsys, "phantom", "--kind", "shepp-logan", "--size", "32", "--out", str(out))
    assert code == 0
    assert stdout.strip() == f"wrote {out}"
    assert imgio.read_slice(out).shape == (32, 32)


def test_metrics_identical_inputs(phantom_file, capsys):
    code, stdout, _ = run(capsys, "metrics", "--ref", str(phantom_file), "--test", str(phantom_file))
    assert code == 0
    fields = dict(kv.split("=") for kv in stdout.split())
    assert float(fields["mse"]) == 0.0
    assert fields["psnr"] == "inf"
    assert float(fields["ssim"]) == 1.0


def test_gen_mask_and_degrade_flow(tmp_path, phantom_file, capsys):
    mask_path = tmp_path / "m.pbm"
    code, _, _ = run(capsys, "gen-mask", "--pattern", "radial", "--size", "64", "--accel", "4", "--out", str(mask_path))
    assert code == 0
    out = tmp_path / "d.pgm"
    code, _, _ = run(capsys, "degrade", "--in", str(phantom_file), "--mask", str(mask_path), "--path", "undersample", "--out", str(out))
    assert code == 0
    code, stdout, _ = run(capsys, "metrics", "--ref", str(phantom_file), "--test", str(out), "--ssim-mode", "windowed")
    assert code == 0
    fields = dict(kv.split("=") for kv in stdout.split())
    assert 0.0 < float(fields["ssim"]) < 1.0


def test_gen_mask_deterministic_bytes(tmp_path, capsys):
    digests = []
    for name in ("a.pbm", "b.pbm"):
        path = tmp_path / name
        code, _, _ = run(capsys, "gen-mask", "--pattern", "radial", "--size", "320", "--accel", "16", "--out", str(path))
        assert code == 0
        digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_accel_and_fraction_agree(tmp_path, capsys):
    for k in (2, 4, 8, 16, 32, 64):
        a = tmp_path / f"a{k}.pbm"
        f = tmp_path / f"f{k}.pbm"
        assert run(capsys, "gen-mask", "--pattern", "spiral", "--size", "64", "--accel", str(k), "--out", str(a))[0] == 0
        assert run(capsys, "gen-mask", "--pattern", "spiral", "--size", "64", "--fraction", str(1 / k), "--out", str(f))[0] == 0
        assert a.read_bytes() == f.read_bytes()


def test_gen_mask_seeded_fastmri(tmp_path, capsys):
    p1 = tmp_path / "s1.pbm"
    p2 = tmp_path / "s2.pbm"
    run(capsys, "gen-mask", "--pattern", "fastmri", "--size", "64", "--accel", "2", "--seed", "5", "--out", str(p1))
    run(capsys, "gen-mask", "--pattern", "fastmri", "--size", "64", "--accel", "2", "--seed", "6", "--out", str(p2))
    assert p1.read_bytes() != p2.read_bytes()
    assert masks.read_mask(p1).meta.seed == 5


def test_fastmri_below_center_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "gen-mask", "--pattern", "fastmri", "--size", "320", "--accel", "32", "--out", str(tmp_path / "x.pbm"))
    assert code == 2
    assert "FractionBelowCenter" in err


def test_unknown_flag_exit_1(capsys):
    code, _, err = run(capsys, "metrics", "--bogus")
    assert code == 1
    assert "usage" in err


def test_missing_subcommand_exit_1(capsys):
    assert run(capsys)[0] == 1


def test_normalize_fallback_status(tmp_path, capsys):
    ramp = tmp_path / "r.ksim"
    imgio.write_slice(imgio.make_phantom("ramp", 32), ramp)
    out = tmp_path / "n.ksim"
    code, stdout, _ = run(capsys, "normalize", "--method", "histogram", "--in", str(ramp), "--out", str(out))
    assert code == 0
    assert "fallback=true" in stdout
    code, stdout, _ = run(capsys, "normalize", "--method", "percentile", "--in", str(ramp), "--out", str(out))
    assert code == 0
    assert "fallback=false" in stdout


def test_normalize_constant_exit_2(tmp_path, capsys):
    const = tmp_path / "c.ksim"
    imgio.write_slice(np.full((16, 16), 0.4), const)
    code, _, err = run(capsys, "normalize", "--method", "percentile", "--in", str(const), "--out", str(tmp_path / "o.ksim"))
    assert code == 2
    assert "DegenerateRange" in err


def test_missing_input_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "metrics", "--ref", str(tmp_path / "no.pgm"), "--test", str(tmp_path / "no.pgm"))
    assert code == 2


def test_degrade_combined_via_cli(tmp_path, phantom_file, capsys):
    mask_path = tmp_path / "m32.pbm"
    run(capsys, "gen-mask", "--pattern", "radial", "--size", "32", "--accel", "2", "--out", str(mask_path))
    out = tmp_path / "c.pgm"
    code, _, _ = run(
        capsys,
        "degrade", "--in", str(phantom_file), "--mask", str(mask_path),
        "--path", "combined", "--downscale", "2",
        "--recon", "zero-filled-plus-bicubic", "--out", str(out),
    )
    assert code == 0
    assert imgio.read_slice(out).shape == (64, 64)


def test_bench_subcommand(tmp_path, capsys):
    cfg = {
        "corpus": "phantom:shepp_logan:64",
        "patterns": ["radial"],
        "accelerations": [2, 4],
        "output": str(tmp_path / "b.csv"),
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code, stdout, _ = run(capsys, "bench", "--config", str(cfg_path), "--no-figures")
    assert code == 0
    lines = (tmp_path / "b.csv").read_text().splitlines()
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header == "pattern,fraction,total_acceleration,path,metric,mean,std,n"
    assert not (tmp_path / "b_curves.png").exists()
    code, _, _ = run(capsys, "bench", "--config", str(cfg_path))
    assert code == 0
    assert (tmp_path / "b_curves.png").exists()


def test_bench_compare_normalizations(tmp_path, capsys):
    cfg = {
        "corpus": "phantom:bimodal_field:64",
        "patterns": ["radial"],
        "accelerations": [2],
        "output": str(tmp_path / "cmp.csv"),
        "figures": False,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code, _, _ = run(capsys, "bench", "--config", str(cfg_path), "--compare-normalizations")
    assert code == 0
    text = (tmp_path / "cmp.csv").read_text()
    assert "normalization,pattern," in text
    assert "percentile," in text and "histogram," in text


def test_idempotent_rerun(tmp_path, capsys):
    out = tmp_path / "p.pgm"
    run(capsys, "phantom", "--kind", "ramp", "--size", "16", "--out", str(out))
    first = out.read_bytes()
    run(capsys, "phantom", "--kind", "ramp", "--size", "16", "--out", str(out))
    assert out.read_bytes() == first
