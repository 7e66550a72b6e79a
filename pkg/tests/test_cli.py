"""End-to-end CLI behavior: subcommands, exit codes, artifacts."""

import numpy as np
import pytest

from restomoe.checkpoint import save_checkpoint
from restomoe.cli import main
from restomoe.data import read_pgm, write_ppm, synth_clean
from restomoe.model import ModelConfig, build_model

TINY_CONFIG = """
base_channels = 8
blocks_per_stage = 1,1,1,1
heads_per_stage = 1,1,1,1
experts = 2
top_k = 1
crop = 32
batch = 1
steps = 3
warmup_steps = 1
seed = 0
"""


def dir_digest(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_synth_deterministic(tmp_path):
    assert main(["synth", "--seed", "7", "--out", str(tmp_path / "a"), "--count", "2", "--size", "32"]) == 0
    assert main(["synth", "--seed", "7", "--out", str(tmp_path / "b"), "--count", "2", "--size", "32"]) == 0
    assert dir_digest(tmp_path / "a") == dir_digest(tmp_path / "b")


def test_train_without_config_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--data", "x", "--out", "y"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--out", "d", "--frobnicate"])
    assert exc.value.code == 2


def test_missing_manifest_exits_1(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(TINY_CONFIG)
    code = main(["train", "--config", str(cfg), "--data", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "run")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_full_pipeline(tmp_path, capsys):
    data = tmp_path / "data"
    run = tmp_path / "run"
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(TINY_CONFIG)

    assert main(["synth", "--seed", "3", "--out", str(data), "--count", "2", "--size", "32", "--kinds", "noise"]) == 0
    assert main(["train", "--config", str(cfg), "--data", str(data / "manifest.txt"), "--out", str(run)]) == 0
    assert (run / "metrics.log").exists()
    assert (run / "checkpoint.bin").exists()
    assert (run / "loss_curves.png").exists()
    assert (run / "config_echo.txt").exists()

    assert main(["eval", "--checkpoint", str(run / "checkpoint.bin"), "--data", str(data / "manifest.txt"), "--out", str(run / "eval")]) == 0
    report = (run / "eval" / "report.txt").read_text().splitlines()
    păth, p, s = report[0].split()
    float(p), float(s)
    assert report[-0 + len(report) - 1- 0]  # summary present
    assert (run / "eval" / "psnr_ssim.png").exists()
    assert (run / "eval" / "expert_load.png").exists()

    img = data / "pair0000_degraded.ppm"
    assert main(["gates", "--checkpoint", str(run / "checkpoint.bin"), "--image", str(img), "--out", str(run / "gates")]) == 0
    gate_files = sorted((run / "gates").glob("gate_*.pgm"))
    assert len(gate_files) == 4  # one block per encoder stage
    gm = read_pgm(gate_files[0])
    assert gm.shape == (1, 32, 32)
    assert (run / "gates" / "gates.png").exists()

    assert main(["route-stats", "--checkpoint", str(run / "checkpoint.bin"), "--image", str(img)]) == 0
    out = capsys.readouterr().out
    assert "refiner 0" in out
    assert "expert 0:" in out


def test_route_stats_needs_one_source(tmp_path, capsys):
    cfg = ModelConfig(base_channels=8, blocks_per_stage=(1, 1, 1, 1), heads_per_stage=(1, 1, 1, 1), experts=2, top_k=1)
    model = build_model(cfg, seed=0)
    ckpt = tmp_path / "m.bin"
    save_checkpoint(ckpt, model, cfg)
    assert main(["route-stats", "--checkpoint", str(ckpt)]) == 2


def test_route_stats_untrained_near_uniform(tmp_path, capsys):
    # random init gives near-uniform routing logits, so per-expert selection
    # counts land close to K*H*W/N
    cfg = ModelConfig()
    model = build_model(cfg, seed=0)
    ckpt = tmp_path / "m.bin"
    save_checkpoint(ckpt, model, cfg)
    img = tmp_path / "probe.ppm"
    write_ppm(img, synth_clean(5, 64, 64))
    assert main(["route-stats", "--checkpoint", str(ckpt), "--image", str(img)]) == 0
    out = capsys.readouterr().out
    for block in out.split("refiner")[1:]:
        counts = []
        total_hw = None
        for line in block.splitlines():
            if "expert" in line and "S=" in line:
                counts.append(int(line.split("S=")[1]))
        n = len(counts)
        k = 2
        expected = k * sum(counts) / (k * n)  # K*H*W / N
        for c in counts:
            assert abs(c - expected) <= 0.1 * expected
