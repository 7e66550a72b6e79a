"""Synthetic clean images, degradation pipelines, image I/O, and manifests.

Every synthesis function is a pure function of its inputs and a seed.
Per-image seeds derive from the manifest seed through splitmix64, so the
dataset is reproducible image by image regardless of generation order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .priors import DegradationLabel

CANONICAL_SIGMAS = (15, 25, 50)


def splitmix64(seed: int, index: int) -> int:
    """Stateless per-index seed stream: one splitmix64 round of seed + index.

    z = (seed + index * 0x9E3779B97F4A7C15); z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
    z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31.
    """
    mask = (1 << 64) - 1
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return (z ^ (z >> 31)) & mask


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def smooth_field(rng: np.random.Generator, h: int, w: int, cells: int = 6) -> np.ndarray:
    """Smooth random field in [0,1]: low-res noise upsampled with cubic zoom."""
    grid = rng.random((cells, cells))
    field = ndimage.zoom(grid, (h / cells, w / cells), order=3, mode="reflect")
    field = field[:h, :w]
    lo, hi = field.min(), field.max()
    if hi > lo:
        field = (field - lo) / (hi - lo)
    return field.astype(np.float32)


def synth_clean(seed: int, h: int, w: int) -> np.ndarray:
    """Procedural clean image [3,H,W] in [0,1]: smooth fields, a gradient,
    and a few soft geometric shapes. Deterministic given the seed."""
    if not (_is_pow2(h) and _is_pow2(w)) or h < 32 or w < 32:
        raise ValueError(f"synth_clean needs power-of-two dims >= 32, got {h}x{w}")
    rng = np.random.default_rng(seed)
    img = np.zeros((3, h, w), dtype=np.float32)
    yy, xx = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")
    theta = rng.uniform(0, 2 * np.pi)
    gradient = (np.cos(theta) * xx + np.sin(theta) * yy).astype(np.float32)
    gradient = (gradient - gradient.min()) / (np.ptp(gradient) + 1e-8)
    base_color = rng.uniform(0.2, 0.8, size=3).astype(np.float32)
    for c in range(3):
        img[c] = 0.45 * smooth_field(rng, h, w) + 0.25 * gradient + 0.3 * base_color[c]
    for _ in range(rng.integers(3, 7)):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        color = rng.uniform(0.0, 1.0, size=3).astype(np.float32)
        if rng.random() < 0.5:
            radius = rng.uniform(0.05, 0.25)
            dist = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
            alpha = np.clip((radius - dist) / (0.02 + radius * 0.2), 0, 1)
        else:
            hy, hx = rng.uniform(0.05, 0.2, size=2)
            inside_y = np.clip((hy - np.abs(yy - cy)) / 0.02, 0, 1)
            inside_x = np.clip((hx - np.abs(xx - cx)) / 0.02, 0, 1)
            alpha = inside_y * inside_x
        alpha = alpha.astype(np.float32) * rng.uniform(0.5, 0.9)
        for c in range(3):
            img[c] = img[c] * (1 - alpha) + color[c] * alpha
    return np.clip(img, 0.0, 1.0)


# ---------------------------------------------------------------------------
# degradations (identity at zero intensity, deterministic given seed)


def add_gaussian_noise(
    img: np.ndarray, sigma_255: float, seed: int, region_mask: np.ndarray | None = None
) -> np.ndarray:
    """Additive Gaussian noise with sigma on the 0..255 scale, clamped.

    An optional region mask [H,W] in {0,1} confines the corruption, which
    keeps a clean/corrupted pixel partition available for gate analysis.
    """
    if sigma_255 not in CANONICAL_SIGMAS and sigma_255 != 0:
        warnings.warn(f"sigma {sigma_255} outside the canonical set {CANONICAL_SIGMAS}")
    if sigma_255 == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma_255 / 255.0, size=img.shape).astype(np.float32)
    if region_mask is not None:
        noise *= region_mask[None].astype(np.float32)
    return np.clip(img + noise, 0.0, 1.0)


def _streak_kernel(length: int, angle: float, width_sigma: float = 0.7) -> np.ndarray:
    """Line kernel at the given angle with a Gaussian cross profile."""
    half = length // 2 + 2
    size = 2 * half + 1
    yy, xx = np.meshgrid(np.arange(size) - half, np.arange(size) - half, indexing="ij")
    along = xx * np.cos(angle) + yy * np.sin(angle)
    across = -xx * np.sin(angle) + yy * np.cos(angle)
    kernel = np.exp(-(across**2) / (2 * width_sigma**2))
    kernel *= np.exp(-(along**2) / (2 * (length / 2.2) ** 2))
    kernel[np.abs(along) > length / 2 + 1] = 0.0
    s = kernel.sum()
    return (kernel / s).astype(np.float32) if s > 0 else kernel.astype(np.float32)


def add_rain(img: np.ndarray, density: float, seed: int) -> np.ndarray:
    """Additive bright rain streaks: impulse field convolved with an
    oriented, Gaussian-blurred line kernel."""
    if density <= 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    _, h, w = img.shape
    n_drops = max(1, int(density * h * w / 40))
    impulses = np.zeros((h, w), dtype=np.float32)
    ys = rng.integers(0, h, size=n_drops)
    xs = rng.integers(0, w, size=n_drops)
    np.add.at(impulses, (ys, xs), rng.uniform(0.6, 1.0, size=n_drops).astype(np.float32))
    angle = rng.uniform(np.deg2rad(70), np.deg2rad(110))
    length = int(rng.integers(7, 13))
    streaks = ndimage.convolve(impulses, _streak_kernel(length, angle), mode="constant")
    streaks *= 3.0  # restore brightness spread by the normalized kernel
    return np.clip(img + streaks[None], 0.0, 1.0)


def add_haze(img: np.ndarray, beta: float, airlight: float, seed: int) -> np.ndarray:
    """Atmospheric scattering: out = img * t + A * (1 - t), t = exp(-beta * d)
    over a smooth synthetic depth field in [0,1]."""
    if beta <= 0:
        raise ValueError(f"scattering coefficient must be positive, got {beta}")
    if not 0.7 <= airlight <= 1.0:
        raise ValueError(f"airlight outside [0.7, 1.0]: {airlight}")
    rng = np.random.default_rng(seed)
    _, h, w = img.shape
    depth = 0.2 + 0.8 * smooth_field(rng, h, w)  # scene stays off the camera plane
    t = np.exp(-beta * depth).astype(np.float32)
    return np.clip(img * t[None] + airlight * (1.0 - t[None]), 0.0, 1.0)


def blob_mask(seed: int, h: int, w: int, coverage: float = 0.5) -> np.ndarray:
    """Binary blob mask covering roughly the requested image fraction."""
    rng = np.random.default_rng(seed)
    field = smooth_field(rng, h, w, cells=4)
    threshold = np.quantile(field, 1.0 - coverage)
    return (field >= threshold).astype(np.float32)


# ---------------------------------------------------------------------------
# PPM / PGM I/O (binary, 8-bit)


def _read_header(raw: bytes, magic: bytes):
    if not raw.startswith(magic):
        raise ValueError(f"expected {magic.decode()} file")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated header")
        fields.append(int(raw[start:pos]))
    return fields, pos + 1  # single whitespace after maxval


def write_ppm(path: str | Path, img: np.ndarray) -> None:
    """Write a [3,H,W] float image in [0,1] as binary P6, maxval 255."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"write_ppm expects [3,H,W], got {img.shape}")
    _, h, w = img.shape
    payload = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(payload.transpose(1, 2, 0).tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (w, h, maxval), offset = _read_header(raw, b"P6")
    if maxval != 255:
        raise ValueError(f"only maxval 255 supported, got {maxval}")
    need = w * h * 3
    body = raw[offset : offset + need]
    if len(body) < need:
        raise ValueError(f"truncated payload: need {need} bytes, have {len(body)}")
    arr = np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)
    return (arr.transpose(2, 0, 1).astype(np.float32)) / 255.0


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    """Write a [H,W] or [1,H,W] float image in [0,1] as binary P5."""
    if img.ndim == 3:
        img = img[0]
    h, w = img.shape
    payload = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(payload.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (w, h, maxval), offset = _read_header(raw, b"P5")
    if maxval != 255:
        raise ValueError(f"only maxval 255 supported, got {maxval}")
    need = w * h
    body = raw[offset : offset + need]
    if len(body) < need:
        raise ValueError(f"truncated payload: need {need} bytes, have {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(1, h, w).astype(np.float32) / 255.0


# ---------------------------------------------------------------------------
# dataset synthesis and manifests


@dataclass
class ImagePair:
    clean: np.ndarray  # [3,H,W] in [0,1]
    degraded: np.ndarray
    label: DegradationLabel
    path: str = ""
    mask: np.ndarray | None = None  # corrupted-region mask [H,W], when known

    def __post_init__(self):
        if self.clean.shape != self.degraded.shape:
            raise ValueError("clean/degraded shape mismatch")


def degrade(clean: np.ndarray, label: DegradationLabel, seed: int, masked_noise: bool = False):
    """Apply the labelled degradations; returns (degraded, corruption-mask)."""
    img = clean.copy()
    mask = None
    for i, (kind, intensity) in enumerate(sorted(label.intensities.items())):
        sub_seed = splitmix64(seed, i + 1)
        if kind == "noise":
            sigma = intensity * 50.0
            if masked_noise:
                mask = blob_mask(splitmix64(seed, 101), img.shape[1], img.shape[2])
            img = add_gaussian_noise(img, sigma, sub_seed, region_mask=mask)
        elif kind == "rain":
            img = add_rain(img, intensity, sub_seed)
        elif kind == "haze":
            img = add_haze(img, beta=max(intensity, 1e-3) * 2.0, airlight=0.9, seed=sub_seed)
        else:
            raise ValueError(f"no synthesis pipeline for kind {kind!r}")
    return img, mask


def make_pair(seed: int, size: int, label: DegradationLabel, masked_noise: bool = False) -> ImagePair:
    clean = synth_clean(splitmix64(seed, 0), size, size)
    degraded, mask = degrade(clean, label, seed, masked_noise=masked_noise)
    return ImagePair(clean=clean, degraded=degraded, label=label, mask=mask)


def write_manifest(path: str | Path, records: list[tuple[str, DegradationLabel]], seed: int) -> None:
    """Lines: path<TAB>kinds(comma-sep)<TAB>intensities(comma-sep).

    The manifest seed is recorded as a leading comment line.
    """
    lines = [f"# seed = {seed}"]
    for rel, label in records:
        kinds = ",".join(label.kinds)
        levels = ",".join(f"{label.intensities[k]:g}" for k in label.kinds)
        lines.append(f"{rel}\t{kinds}\t{levels}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> tuple[list[tuple[str, DegradationLabel]], int]:
    records = []
    seed = 0
    for line in Path(path).read_text().splitlines():
        line = line.rstrip()
        if not line:
            continue
        if line.startswith("#"):
            if "seed" in line and "=" in line:
                seed = int(line.split("=")[1])
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"malformed manifest line: {line!r}")
        rel, kinds_s, levels_s = parts
        kinds = [k for k in kinds_s.split(",") if k]
        levels = [float(v) for v in levels_s.split(",") if v]
        if len(kinds) != len(levels):
            raise ValueError(f"kinds/intensities mismatch in line: {line!r}")
        records.append((rel, DegradationLabel(dict(zip(kinds, levels)))))
    return records, seed


def synth_dataset(
    out_dir: str | Path,
    seed: int,
    count: int,
    size: int,
    kinds: tuple[str, ...] = ("noise", "rain", "haze"),
    masked_noise: bool = False,
    sigma: float = 25.0,
) -> Path:
    """Generate image pairs plus a manifest; returns the manifest path.

    Files per pair: pair####_degraded.ppm, pair####_clean.ppm, and
    pair####_mask.pgm when a corruption mask exists.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        if kind == "noise":
            label = DegradationLabel({"noise": sigma / 50.0})
        elif kind == "rain":
            label = DegradationLabel({"rain": 0.3})
        elif kind == "haze":
            label = DegradationLabel({"haze": 0.5})
        else:
            raise ValueError(f"no synthesis pipeline for kind {kind!r}")
        pair = make_pair(splitmix64(seed, i), size, label, masked_noise=masked_noise)
        stem = f"pair{i:04d}"
        write_ppm(out / f"{stem}_degraded.ppm", pair.degraded)
        write_ppm(out / f"{stem}_clean.ppm", pair.clean)
        if pair.mask is not None:
            write_pgm(out / f"{stem}_mask.pgm", pair.mask)
        records.append((f"{stem}_degraded.ppm", label))
    manifest = out / "manifest.txt"
    write_manifest(manifest, records, seed)
    return manifest


def load_pairs(manifest_path: str | Path) -> list[ImagePair]:
    """Load the dataset a manifest describes (clean/mask paths by convention)."""
    manifest_path = Path(manifest_path)
    records, _ = read_manifest(manifest_path)
    root = manifest_path.parent
    pairs = []
    for rel, label in records:
        degraded = read_ppm(root / rel)
        clean = read_ppm(root / rel.replace("_degraded", "_clean"))
        mask_path = root / rel.replace("_degraded.ppm", "_mask.pgm")
        mask = read_pgm(mask_path)[0] if mask_path.exists() else None
        pairs.append(ImagePair(clean=clean, degraded=degraded, label=label, path=rel, mask=mask))
    return pairs
