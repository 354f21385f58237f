from __future__ import annotations

import json
from pathlib import Path

import pytest

from pyamulet.config import SEED_ENV, RunConfig
from pyamulet.errors import ConfigError
from pyamulet.models import AttentionDirection, ShapeKind


def _write(tmp_path: Path, payload: dict) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return path


def test_defaults_round_trip(tmp_path: Path) -> None:
    config = RunConfig()
    path = tmp_path / "echo.json"
    config.dump(path)
    assert RunConfig.load(path, environ={}) == config


def test_partial_document_keeps_other_defaults(tmp_path: Path) -> None:
    path = _write(
        tmp_path,
        {
            "network": {"levels": 3, "backbone_channels": [8, 8, 8], "attention_direction": "bottom_up"},
            "data": {"synth": {"kinds": ["ellipse"], "image_hw": [32, 32]}},
        },
    )
    config = RunConfig.load(path, environ={})
    assert config.network.levels == 3
    assert config.network.attention_direction is AttentionDirection.BOTTOM_UP
    assert config.data.synth.kinds == (ShapeKind.ELLIPSE,)
    assert config.data.synth.image_hw == (32, 32)
    assert config.optim.lr == 1e-2


def test_unknown_key_is_named(tmp_path: Path) -> None:
    path = _write(tmp_path, {"optim": {"learning_rate": 0.1}})
    with pytest.raises(ConfigError) as info:
        RunConfig.load(path, environ={})
    assert info.value.key == "optim.learning_rate"


def test_unknown_section(tmp_path: Path) -> None:
    with pytest.raises(ConfigError) as info:
        RunConfig.load(_write(tmp_path, {"trainer": {}}), environ={})
    assert info.value.key == "trainer"


@pytest.mark.parametrize(
    "payload, key",
    [
        ({"network": {"pyramid": "yes"}}, "network.pyramid"),
        ({"optim": {"batch_size": 2.5}}, "optim.batch_size"),
        ({"optim": {"lr": True}}, "optim.lr"),
        ({"network": {"attention_direction": "sideways"}}, "network.attention_direction"),
        ({"network": {"input_hw": [64]}}, "network.input_hw"),
    ],
)
def test_type_errors_name_the_key(tmp_path: Path, payload: dict, key: str) -> None:
    with pytest.raises(ConfigError) as info:
        RunConfig.load(_write(tmp_path, payload), environ={})
    assert info.value.key == key


def test_semantic_validation(tmp_path: Path) -> None:
    with pytest.raises(ConfigError) as info:
        RunConfig.load(_write(tmp_path, {"network": {"levels": 1, "backbone_channels": [8]}}), environ={})
    assert info.value.key == "network.levels"
    with pytest.raises(ConfigError) as info:
        RunConfig.load(_write(tmp_path, {"loss": {"alpha": [1.0, 1.0]}}), environ={})
    assert info.value.key == "loss.alpha"


def test_invalid_json(tmp_path: Path) -> None:
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(path, environ={})


def test_seed_environment_override(tmp_path: Path) -> None:
    path = _write(tmp_path, {"data": {"seed": 1}})
    config = RunConfig.load(path, environ={SEED_ENV: "99"})
    assert config.data.seed == 99
    assert config.data.synth.seed == 99
    with pytest.raises(ConfigError) as info:
        RunConfig.load(path, environ={SEED_ENV: "abc"})
    assert info.value.key == SEED_ENV


def test_variants_derive_from_base() -> None:
    base = RunConfig().network
    assert base.for_variant("e") == base
    assert base.for_variant("f").stage_depth == 2 * base.stage_depth
    with pytest.raises(ConfigError):
        base.for_variant("z")


def test_single_value_batch_norm_is_rejected(tmp_path: Path) -> None:
    network = {"levels": 2, "input_hw": [2, 2], "backbone_channels": [4, 4], "agg_width": 4, "stage_depth": 1}
    with pytest.raises(ConfigError) as info:
        RunConfig.load(_write(tmp_path, {"network": network, "optim": {"batch_size": 1}}), environ={})
    assert info.value.key == "network.input_hw"
    config = RunConfig.load(_write(tmp_path, {"network": network, "optim": {"batch_size": 2}}), environ={})
    assert config.network.input_hw == (2, 2)
