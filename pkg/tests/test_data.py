"""Synthesis determinism, degradation behavior, image I/O round trips."""

import numpy as np
import pytest

from restomoe.data import (
    ImagePair,
    add_gaussian_noise,
    add_haze,
    add_rain,
    blob_mask,
    load_pairs,
    make_pair,
    read_manifest,
    read_pgm,
    read_ppm,
    splitmix64,
    synth_clean,
    synth_dataset,
    write_pgm,
    write_ppm,
)
from restomoe.metrics import psnr
from restomoe.priors import DegradationLabel

SEEDS = [0, 1, 2]


# ---------------------------------------------------------------------------
# clean synthesis


def test_synth_clean_deterministic():
    a = synth_clean(7, 32, 32)
    b = synth_clean(7, 32, 32)
    np.testing.assert_array_equal(a, b)


def test_synth_clean_range_and_variance():
    for seed in range(100):
        img = synth_clean(seed, 32, 32)
        assert img.min() >= 0.0 and img.max() <= 1.0
        assert img.var() > 1e-3


def test_synth_clean_rejects_bad_dims():
    with pytest.raises(ValueError, match="power-of-two"):
        synth_clean(0, 48, 48)
    with pytest.raises(ValueError, match="power-of-two"):
        synth_clean(0, 16, 16)


# ---------------------------------------------------------------------------
# noise


def test_noise_zero_sigma_identity():
    img = synth_clean(0, 32, 32)
    np.testing.assert_array_equal(add_gaussian_noise(img, 0, seed=1), img)


@pytest.mark.parametrize("seed", SEEDS)
def test_noise_std_matches_sigma(seed):
    img = np.full((3, 64, 64), 0.5, dtype=np.float32)
    out = add_gaussian_noise(img, 25, seed=seed)
    measured = (out - img).std()
    assert measured == pytest.approx(25 / 255, rel=0.05)


def test_noise_warns_off_canonical():
    img = np.full((3, 32, 32), 0.5, dtype=np.float32)
    with pytest.warns(UserWarning, match="canonical"):
        add_gaussian_noise(img, 33, seed=0)


def test_noise_respects_region_mask():
    img = np.full((3, 32, 32), 0.5, dtype=np.float32)
    mask = np.zeros((32, 32), dtype=np.float32)
    mask[:16] = 1.0
    out = add_gaussian_noise(img, 50, seed=0, region_mask=mask)
    assert np.array_equal(out[:, 16:], img[:, 16:])
    assert np.abs(out[:, :16] - img[:, :16]).max() > 0


def test_psnr_decreases_with_sigma():
    img = synth_clean(3, 64, 64)
    values = [psnr(add_gaussian_noise(img, s, seed=5), img) for s in (15, 25, 50)]
    assert values[0] > values[1] > values[2]


# ---------------------------------------------------------------------------
# rain


def test_rain_zero_density_identity():
    img = synth_clean(1, 32, 32)
    np.testing.assert_array_equal(add_rain(img, 0.0, seed=2), img)


@pytest.mark.parametrize("seed", SEEDS)
def test_rain_is_additive_bright(seed):
    img = synth_clean(seed, 64, 64) * 0.6
    out = add_rain(img, 0.3, seed=seed)
    assert out.mean() >= img.mean()


def test_rain_psnr_monotone_in_density():
    img = synth_clean(9, 64, 64)
    values = [psnr(add_rain(img, d, seed=4), img) for d in (0.1, 0.3, 0.5)]
    assert values[0] > values[1] > values[2]


# ---------------------------------------------------------------------------
# haze


def test_haze_limits():
    img = synth_clean(2, 32, 32)
    near_identity = add_haze(img, beta=1e-4, airlight=0.9, seed=0)
    assert np.abs(near_identity - img).max() < 1e-3
    saturated = add_haze(img, beta=200.0, airlight=0.9, seed=0)
    assert np.abs(saturated - 0.9).max() < 1e-2


def test_haze_mean_between_image_and_airlight():
    img = synth_clean(2, 32, 32) * 0.5  # mean well below airlight
    out = add_haze(img, beta=1.0, airlight=0.9, seed=0)
    assert img.mean() < out.mean() < 0.9


def test_haze_rejects_nonpositive_beta():
    with pytest.raises(ValueError, match="positive"):
        add_haze(synth_clean(0, 32, 32), beta=0.0, airlight=0.9, seed=0)


# ---------------------------------------------------------------------------
# masks and pairs


def test_blob_mask_coverage():
    mask = blob_mask(5, 64, 64, coverage=0.5)
    assert set(np.unique(mask)) <= {0.0, 1.0}
    assert 0.3 < mask.mean() < 0.7


def test_make_pair_masked_noise_keeps_clean_region():
    pair = make_pair(11, 64, DegradationLabel({"noise": 0.5}), masked_noise=True)
    assert pair.mask is not None
    outside = pair.mask == 0
    np.testing.assert_array_equal(
        pair.degraded[:, outside], pair.clean[:, outside]
    )


# ---------------------------------------------------------------------------
# image I/O


def test_ppm_round_trip_quantization_bound(tmp_path):
    img = synth_clean(0, 32, 32)
    path = tmp_path / "img.ppm"
    write_ppm(path, img)
    back = read_ppm(path)
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-7


def test_ppm_red_image_exact_bytes(tmp_path):
    img = np.zeros((3, 2, 2), dtype=np.float32)
    img[0] = 1.0
    path = tmp_path / "red.ppm"
    write_ppm(path, img)
    raw = path.read_bytes()
    assert raw == b"P6\n2 2\n255\n" + b"\xff\x00\x00" * 4


def test_pgm_round_trip_shape(tmp_path):
    img = np.linspace(0, 1, 64, dtype=np.float32).reshape(8, 8)
    path = tmp_path / "g.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert back.shape == (1, 8, 8)
    assert np.abs(back[0] - img).max() <= 0.5 / 255 + 1e-7


def test_read_ppm_rejects_truncated(tmp_path):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P6\n4 4\n255\n\x00\x00")
    with pytest.raises(ValueError, match="truncated"):
        read_ppm(path)


def test_read_ppm_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P5\n2 2\n255\n" + b"\x00" * 4)
    with pytest.raises(ValueError, match="P6"):
        read_ppm(path)


# ---------------------------------------------------------------------------
# manifest / dataset


def test_splitmix_spreads_seeds():
    seeds = {splitmix64(42, i) for i in range(100)}
    assert len(seeds) == 100


def test_synth_dataset_round_trip(tmp_path):
    manifest = synth_dataset(tmp_path, seed=3, count=3, size=32)
    records, seed = read_manifest(manifest)
    assert seed == 3
    assert len(records) == 3
    pairs = load_pairs(manifest)
    assert len(pairs) == 3
    for pair in pairs:
        assert pair.clean.shape == (3, 32, 32)
        assert pair.degraded.shape == (3, 32, 32)


def test_synth_dataset_deterministic(tmp_path):
    m1 = synth_dataset(tmp_path / "a", seed=5, count=2, size=32)
    m2 = synth_dataset(tmp_path / "b", seed=5, count=2, size=32)
    for p1, p2 in zip(sorted((tmp_path / "a").iterdir()), sorted((tmp_path / "b").iterdir())):
        assert p1.name == p2.name
        assert p1.read_bytes() == p2.read_bytes()


def test_manifest_format(tmp_path):
    manifest = synth_dataset(tmp_path, seed=1, count=2, size=32, kinds=("noise",), masked_noise=True)
    lines = [l for l in manifest.read_text().splitlines() if not l.startswith("#")]
    for line in lines:
        path_s, kinds_s, levels_s = line.split("\t")
        assert path_s.endswith("_degraded.ppm")
        assert kinds_s == "noise"
        assert float(levels_s) == 0.5  # sigma 25 / 50
    pairs = load_pairs(manifest)
    assert all(p.mask is not None for p in pairs)
