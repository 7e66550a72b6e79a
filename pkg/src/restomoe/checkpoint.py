"""Binary checkpoint format with a trailing payload checksum.

Layout (all integers little-endian u32):
  magic "RMOE" | version | config_len | config utf-8 | n_params |
  per param: name_len, name utf-8, rank, dims..., float32 LE payload |
  crc32 of all payload bytes concatenated.

load(save(model)) reproduces every parameter bit-exactly.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .autodiff import Module
from .config import model_config_from, model_config_text, parse_config_text

MAGIC = b"RMOE"
VERSION = 1


def save_checkpoint(path: str | Path, model: Module, model_cfg) -> None:
    params = list(model.named_parameters())
    cfg_bytes = model_config_text(model_cfg).encode()
    crc = 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(cfg_bytes)))
        fh.write(cfg_bytes)
        fh.write(struct.pack("<I", len(params)))
        for name, p in params:
            name_b = name.encode()
            arr = np.ascontiguousarray(p.data, dtype="<f4")
            fh.write(struct.pack("<I", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            payload = arr.tobytes()
            crc = zlib.crc32(payload, crc)
            fh.write(payload)
        fh.write(struct.pack("<I", crc))


def load_checkpoint(path: str | Path):
    """Returns (ModelConfig, ordered list of (name, float32 array))."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    pos = 4
    (version,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (cfg_len,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    cfg = model_config_from(parse_config_text(raw[pos : pos + cfg_len].decode()))
    pos += cfg_len
    (n_params,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    params = []
    crc = 0
    for _ in range(n_params):
        (name_len,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        name = raw[pos : pos + name_len].decode()
        pos += name_len
        (rank,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}I", raw, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        payload = raw[pos : pos + 4 * count]
        if len(payload) < 4 * count:
            raise ValueError(f"truncated payload for parameter {name!r}")
        pos += 4 * count
        crc = zlib.crc32(payload, crc)
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
        params.append((name, arr))
    (stored_crc,) = struct.unpack_from("<I", raw, pos)
    if stored_crc != crc:
        raise ValueError(f"checksum mismatch: stored {stored_crc:#x}, computed {crc:#x}")
    return cfg, params


def apply_state(model: Module, params: list[tuple[str, np.ndarray]]) -> None:
    current = dict(model.named_parameters())
    if set(current) != {name for name, _ in params}:
        missing = set(current) - {n for n, _ in params}
        extra = {n for n, _ in params} - set(current)
        raise ValueError(f"parameter names differ: missing={sorted(missing)}, extra={sorted(extra)}")
    for name, arr in params:
        p = current[name]
        if p.data.shape != arr.shape:
            raise ValueError(f"shape mismatch for {name}: {p.data.shape} vs {arr.shape}")
        p.data = arr.astype(np.float32, copy=True)


def load_model(path: str | Path):
    """Rebuild the model a checkpoint describes and load its weights."""
    from .model import RestorationNet

    cfg, params = load_checkpoint(path)
    model = RestorationNet(cfg, seed=0)
    apply_state(model, params)
    return model, cfg
