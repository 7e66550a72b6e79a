"""key=value config parsing and serialization round trips."""

import pytest

from restomoe.config import (
    model_config_from,
    model_config_text,
    parse_config_text,
    train_config_from,
    train_config_text,
)
from restomoe.model import ModelConfig
from restomoe.train import TrainConfig


def test_parse_ignores_comments_and_blanks():
    values = parse_config_text("# header\n\nbase_channels = 8  # inline\n")
    assert values == {"base_channels": "8"}


def test_parse_rejects_malformed_line():
    with pytest.raises(ValueError, match="key = value"):
        parse_config_text("this is not a config\n")


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown config keys"):
        model_config_from({"channles": "16"})


def test_model_round_trip():
    cfg = ModelConfig(base_channels=8, blocks_per_stage=(1, 1, 1, 1), experts=2, top_k=1)
    parsed = model_config_from(parse_config_text(model_config_text(cfg)))
    assert parsed == cfg


def test_train_round_trip():
    tc = TrainConfig(crop=32, batch=4, steps=100, warmup_steps=10, lambda1=0.0, cv_squared=True)
    parsed = train_config_from(parse_config_text(train_config_text(tc)))
    assert parsed == tc


def test_mixed_file_splits_between_configs():
    text = "base_channels = 8\nblocks_per_stage = 1,1,1,1\nexperts = 2\ntop_k = 1\ncrop = 32\nsteps = 64\nwarmup_steps = 8\nprior_mode = learned\n"
    values = parse_config_text(text)
    mcfg = model_config_from(values)
    tcfg = train_config_from(values)
    assert mcfg.base_channels == 8
    assert mcfg.prior.mode == "learned"
    assert tcfg.crop == 32
    assert tcfg.steps == 64
