from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from pyamulet.checkpoint import (
    MAGIC,
    Checkpoint,
    TrainingState,
    decode_tensors,
    encode_tensors,
    load_checkpoint,
    save_checkpoint,
)
from pyamulet.errors import CheckpointError
from pyamulet.network import init_params, parameter_layout

from .helpers import tiny_network


def _checkpoint(window: list[float] | None = None) -> Checkpoint:
    config = tiny_network()
    store = init_params(config, 3)
    rng = np.random.default_rng(0)
    for name in store.momentum:
        store.momentum[name][...] = rng.standard_normal(store.momentum[name].shape)
    for state in store.bn_states.values():
        state.running_mean[...] = rng.standard_normal(state.channels)
        state.running_var[...] = rng.uniform(0.5, 2.0, size=state.channels)
    state = TrainingState(iteration=40, lr_decays=2, loss_window=window if window is not None else [0.5, 0.25])
    return Checkpoint(store=store, network=config, state=state)


def test_round_trip_is_bit_exact(tmp_path: Path) -> None:
    original = _checkpoint()
    path = tmp_path / "ckpt.aamu"
    save_checkpoint(path, original)
    loaded = load_checkpoint(path)

    assert loaded.network == original.network
    assert loaded.state == original.state
    assert loaded.store.names() == original.store.names()
    for name in original.store:
        np.testing.assert_array_equal(loaded.store[name].data, original.store[name].data)
        np.testing.assert_array_equal(loaded.store.momentum[name], original.store.momentum[name])
    for name, state in original.store.bn_states.items():
        np.testing.assert_array_equal(loaded.store.bn_states[name].running_mean, state.running_mean)
        np.testing.assert_array_equal(loaded.store.bn_states[name].running_var, state.running_var)
    loaded.store.validate(parameter_layout(original.network))


def test_empty_loss_window_round_trips(tmp_path: Path) -> None:
    path = tmp_path / "ckpt.aamu"
    save_checkpoint(path, _checkpoint(window=[]))
    assert load_checkpoint(path).state.loss_window == []


def test_save_replaces_atomically(tmp_path: Path) -> None:
    path = tmp_path / "ckpt.aamu"
    save_checkpoint(path, _checkpoint())
    save_checkpoint(path, _checkpoint(window=[1.0]))
    assert load_checkpoint(path).state.loss_window == [1.0]
    assert [p.name for p in tmp_path.iterdir()] == ["ckpt.aamu"]


def test_bad_magic(tmp_path: Path) -> None:
    path = tmp_path / "ckpt.aamu"
    save_checkpoint(path, _checkpoint())
    data = bytearray(path.read_bytes())
    data[:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="bad magic"):
        load_checkpoint(path)


def test_truncated_payload() -> None:
    buf = encode_tensors({"a": np.ones((1, 2, 3, 4), dtype=np.float32)})
    with pytest.raises(CheckpointError, match="payload"):
        decode_tensors(buf[:-5])


def test_truncated_header() -> None:
    buf = encode_tensors({"weights": np.ones((1, 1, 1, 1), dtype=np.float32)})
    with pytest.raises(CheckpointError):
        decode_tensors(buf[:14])
    with pytest.raises(CheckpointError, match="too short"):
        decode_tensors(MAGIC)


def test_trailing_bytes() -> None:
    buf = encode_tensors({"a": np.zeros((1, 1, 1, 1), dtype=np.float32)})
    with pytest.raises(CheckpointError, match="trailing"):
        decode_tensors(buf + b"\x00")


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.aamu")


def test_layout_mismatch_is_reported(tmp_path: Path) -> None:
    path = tmp_path / "ckpt.aamu"
    save_checkpoint(path, _checkpoint())
    other = tiny_network(levels=3)
    with pytest.raises(CheckpointError):
        load_checkpoint(path).store.validate(parameter_layout(other))
