"""Plain-text "key = value" configuration mirroring the config dataclasses.

Blank lines and `#` comments are ignored; list values are comma-separated;
booleans accept true/false/1/0. Unknown keys are rejected so typos fail
loudly.
"""

from __future__ import annotations

from pathlib import Path

from .priors import PriorProviderConfig


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    return values


def parse_config_file(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


def _as_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _as_int_tuple(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


_MODEL_KEYS = {
    "base_channels": int,
    "blocks_per_stage": _as_int_tuple,
    "heads_per_stage": _as_int_tuple,
    "experts": int,
    "top_k": int,
    "expansion": float,
    "prior_mode": str,
    "prior_features": int,
    "prior_kinds": lambda s: tuple(v.strip() for v in s.split(",") if v.strip()),
    "prior_tokens": int,
    "prior_seed": int,
}

_TRAIN_KEYS = {
    "crop": int,
    "batch": int,
    "steps": int,
    "lr_init": float,
    "betas": lambda s: tuple(float(v) for v in s.split(",")),
    "weight_decay": float,
    "warmup_steps": int,
    "lr_min": float,
    "flip": _as_bool,
    "rotate": _as_bool,
    "seed": int,
    "lambda1": float,
    "lambda2": float,
    "charb_eps": float,
    "balance_eps": float,
    "cv_squared": _as_bool,
    "checkpoint_every": int,
    "prior_ce_weight": float,
}


def model_config_from(values: dict[str, str]):
    from .model import ModelConfig

    unknown = set(values) - set(_MODEL_KEYS) - set(_TRAIN_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    prior_kwargs = {}
    for key, convert in _MODEL_KEYS.items():
        if key not in values:
            continue
        parsed = convert(values[key])
        if key == "prior_mode":
            prior_kwargs["mode"] = parsed
        elif key == "prior_features":
            prior_kwargs["d_f"] = parsed
        elif key == "prior_kinds":
            prior_kwargs["kinds"] = parsed
        elif key == "prior_tokens":
            prior_kwargs["tokens"] = parsed
        elif key == "prior_seed":
            prior_kwargs["embed_seed"] = parsed
        else:
            kwargs[key] = parsed
    kwargs["prior"] = PriorProviderConfig(**prior_kwargs)
    return ModelConfig(**kwargs)


def train_config_from(values: dict[str, str]):
    from .train import TrainConfig

    unknown = set(values) - set(_MODEL_KEYS) - set(_TRAIN_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: convert(values[k]) for k, convert in _TRAIN_KEYS.items() if k in values}
    return TrainConfig(**kwargs)


def model_config_text(cfg) -> str:
    lines = [
        f"base_channels = {cfg.base_channels}",
        f"blocks_per_stage = {','.join(map(str, cfg.blocks_per_stage))}",
        f"heads_per_stage = {','.join(map(str, cfg.heads_per_stage))}",
        f"experts = {cfg.experts}",
        f"top_k = {cfg.top_k}",
        f"expansion = {cfg.expansion:g}",
        f"prior_mode = {cfg.prior.mode}",
        f"prior_features = {cfg.prior.d_f}",
        f"prior_kinds = {','.join(cfg.prior.kinds)}",
        f"prior_tokens = {cfg.prior.tokens}",
        f"prior_seed = {cfg.prior.embed_seed}",
    ]
    return "\n".join(lines) + "\n"


def train_config_text(cfg) -> str:
    lines = [
        f"crop = {cfg.crop}",
        f"batch = {cfg.batch}",
        f"steps = {cfg.steps}",
        f"lr_init = {cfg.lr_init:g}",
        f"betas = {cfg.betas[0]:g},{cfg.betas[1]:g}",
        f"weight_decay = {cfg.weight_decay:g}",
        f"warmup_steps = {cfg.warmup_steps}",
        f"lr_min = {cfg.lr_min:g}",
        f"flip = {str(cfg.flip).lower()}",
        f"rotate = {str(cfg.rotate).lower()}",
        f"seed = {cfg.seed}",
        f"lambda1 = {cfg.lambda1:g}",
        f"lambda2 = {cfg.lambda2:g}",
        f"charb_eps = {cfg.charb_eps:g}",
        f"balance_eps = {cfg.balance_eps:g}",
        f"cv_squared = {str(cfg.cv_squared).lower()}",
        f"checkpoint_every = {cfg.checkpoint_every}",
        f"prior_ce_weight = {cfg.prior_ce_weight:g}",
    ]
    return "\n".join(lines) + "\n"
