"""Binary checkpoint codec ("AAMU" tensor archive)."""
from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np

from .batchnorm import BatchNormState
from .config import section_from_dict, section_to_dict
from .errors import CheckpointError, ConfigError
from .models import NetworkConfig
from .params import ParameterStore
from .tensor import Tensor

logger = logging.getLogger(__name__)

MAGIC = b"AAMU"
VERSION = 1

_PARAM = "param/"
_MOMENTUM = "momentum/"
_BN = "bn/"
_META_CONFIG = "meta/network_config"
_META_ITERATION = "meta/iteration"
_META_DECAYS = "meta/lr_decays"
_META_WINDOW = "meta/loss_window"


@dataclass
class TrainingState:
    iteration: int = 0
    lr_decays: int = 0
    loss_window: List[float] = field(default_factory=list)


@dataclass
class Checkpoint:
    store: ParameterStore
    network: NetworkConfig
    state: TrainingState = field(default_factory=TrainingState)


def encode_tensors(tensors: Dict[str, np.ndarray]) -> bytes:
    out = bytearray()
    out.extend(MAGIC)
    out.extend(struct.pack("<II", VERSION, len(tensors)))
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise CheckpointError(f"checkpoint: tensor name too long ({len(encoded)} bytes)")
        if array.ndim != 4:
            raise CheckpointError(f"checkpoint: tensor {name} has rank {array.ndim}, expected 4")
        out.extend(struct.pack("<H", len(encoded)))
        out.extend(encoded)
        out.extend(struct.pack("<B4I", 4, *array.shape))
        out.extend(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return bytes(out)


def decode_tensors(buf: bytes) -> Dict[str, np.ndarray]:
    if len(buf) < 12:
        raise CheckpointError(f"checkpoint: file is {len(buf)} bytes, too short for a header")
    if buf[:4] != MAGIC:
        raise CheckpointError(f"checkpoint: bad magic {bytes(buf[:4])!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"checkpoint: unsupported version {version}")
    offset = 12
    tensors: Dict[str, np.ndarray] = {}
    for idx in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", buf, offset)
            offset += 2
            if offset + name_len > len(buf):
                raise struct.error("name runs past end of file")
            name = bytes(buf[offset : offset + name_len]).decode("utf-8")
            offset += name_len
            rank, *dims = struct.unpack_from("<B4I", buf, offset)
            offset += struct.calcsize("<B4I")
        except (struct.error, UnicodeDecodeError) as exc:
            raise CheckpointError(f"checkpoint: truncated header for tensor {idx} at byte {offset}") from exc
        if rank != 4:
            raise CheckpointError(f"checkpoint: tensor {name} has rank {rank}, expected 4")
        size = int(np.prod(dims)) * 4
        if offset + size > len(buf):
            raise CheckpointError(
                f"checkpoint: tensor {name} expects {size} payload bytes, only {len(buf) - offset} remain"
            )
        if size == 0:
            tensors[name] = np.zeros(dims, dtype=np.float32)
        else:
            payload = np.frombuffer(buf, dtype="<f4", count=size // 4, offset=offset)
            tensors[name] = payload.reshape(dims).astype(np.float32)
        offset += size
    if offset != len(buf):
        raise CheckpointError(f"checkpoint: {len(buf) - offset} trailing bytes after {count} tensors")
    return tensors


def _scalar(value: float) -> np.ndarray:
    return np.full((1, 1, 1, 1), value, dtype=np.float32)


def _row(values) -> np.ndarray:
    array = np.asarray(values, dtype=np.float32)
    return array.reshape(1, 1, 1, array.size)


def save_checkpoint(path: str | Path, checkpoint: Checkpoint) -> None:
    """Write atomically: the previous file stays intact until the new one is complete."""

    store, state = checkpoint.store, checkpoint.state
    config_bytes = json.dumps(section_to_dict(checkpoint.network), sort_keys=True).encode("utf-8")
    tensors: Dict[str, np.ndarray] = {
        _META_CONFIG: _row(list(config_bytes)),
        _META_ITERATION: _scalar(state.iteration),
        _META_DECAYS: _scalar(state.lr_decays),
        _META_WINDOW: _row(state.loss_window),
    }
    for name, tensor in store.params.items():
        tensors[_PARAM + name] = tensor.data
        tensors[_MOMENTUM + name] = store.momentum[name]
    for name, bn in store.bn_states.items():
        tensors[f"{_BN}{name}/mean"] = bn.running_mean.reshape(1, -1, 1, 1)
        tensors[f"{_BN}{name}/var"] = bn.running_var.reshape(1, -1, 1, 1)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_tensors(tensors))
    os.replace(tmp, path)
    logger.debug("checkpoint: wrote %d tensors to %s", len(tensors), path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"checkpoint: cannot read {path}: {exc}") from exc
    tensors = decode_tensors(buf)

    try:
        config_bytes = bytes(int(v) for v in tensors.pop(_META_CONFIG).reshape(-1))
        network = section_from_dict(NetworkConfig, json.loads(config_bytes.decode("utf-8")), "network")
        iteration = int(tensors.pop(_META_ITERATION).reshape(-1)[0])
        decays = int(tensors.pop(_META_DECAYS).reshape(-1)[0])
        window = [float(v) for v in tensors.pop(_META_WINDOW).reshape(-1)]
    except KeyError as exc:
        raise CheckpointError(f"checkpoint: {path} lacks metadata entry {exc}") from exc
    except (ValueError, ConfigError) as exc:
        raise CheckpointError(f"checkpoint: {path} has unreadable network config: {exc}") from exc

    store = ParameterStore()
    bn_parts: Dict[str, Dict[str, np.ndarray]] = {}
    for name, array in tensors.items():
        if name.startswith(_PARAM):
            store.params[name[len(_PARAM) :]] = Tensor(array, requires_grad=True)
        elif name.startswith(_MOMENTUM):
            store.momentum[name[len(_MOMENTUM) :]] = array
        elif name.startswith(_BN):
            bn_name, _, part = name[len(_BN) :].rpartition("/")
            bn_parts.setdefault(bn_name, {})[part] = array.reshape(-1)
        else:
            raise CheckpointError(f"checkpoint: unexpected tensor {name!r}")
    if set(store.params) != set(store.momentum):
        raise CheckpointError("checkpoint: parameters and momentum buffers do not pair up")
    for bn_name, parts in bn_parts.items():
        if set(parts) != {"mean", "var"}:
            raise CheckpointError(f"checkpoint: incomplete running statistics for {bn_name}")
        store.bn_states[bn_name] = BatchNormState(parts["mean"].copy(), parts["var"].copy())
    return Checkpoint(store=store, network=network, state=TrainingState(iteration, decays, window))


__all__ = [
    "MAGIC",
    "VERSION",
    "TrainingState",
    "Checkpoint",
    "encode_tensors",
    "decode_tensors",
    "save_checkpoint",
    "load_checkpoint",
]
