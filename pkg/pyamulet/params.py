"""Named trainable tensors, their momentum buffers and BN running statistics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

import numpy as np

from .batchnorm import BatchNormState
from .errors import CheckpointError
from .tensor import Tensor

BIAS_SUFFIXES = (".b_a", ".b_s", ".beta")


def is_bias(name: str) -> bool:
    return name.endswith(BIAS_SUFFIXES)


def xavier_bound(dims: Tuple[int, int, int, int]) -> float:
    out_c, in_c, kh, kw = dims
    return float(np.sqrt(6.0 / (in_c * kh * kw + out_c * kh * kw)))


@dataclass
class ParameterStore:
    params: Dict[str, Tensor] = field(default_factory=dict)
    momentum: Dict[str, np.ndarray] = field(default_factory=dict)
    bn_states: Dict[str, BatchNormState] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self.params[name]
        except KeyError as exc:
            raise KeyError(f"parameter store has no entry {name!r}") from exc

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"parameter {name!r} registered twice")
        tensor = Tensor(np.asarray(data, dtype=np.float32), requires_grad=True)
        self.params[name] = tensor
        self.momentum[name] = np.zeros_like(tensor.data)
        return tensor

    def add_bn(self, name: str, channels: int) -> None:
        if name in self.bn_states:
            raise ValueError(f"batch-norm state {name!r} registered twice")
        self.bn_states[name] = BatchNormState.fresh(channels)
        self.add(f"{name}.gamma", np.ones((1, channels, 1, 1)))
        self.add(f"{name}.beta", np.zeros((1, channels, 1, 1)))

    def xavier(self, name: str, dims: Tuple[int, int, int, int], rng: np.random.Generator) -> Tensor:
        bound = xavier_bound(dims)
        return self.add(name, rng.uniform(-bound, bound, size=dims).astype(np.float32))

    def trainable(self) -> List[Tensor]:
        return list(self.params.values())

    def names(self) -> List[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def astype(self, dtype) -> "ParameterStore":
        """Deep copy at another precision (used by the 64-bit gradient check)."""

        return ParameterStore(
            params={name: t.astype(dtype) for name, t in self.params.items()},
            momentum={name: m.astype(dtype, copy=True) for name, m in self.momentum.items()},
            bn_states={name: s.copy() for name, s in self.bn_states.items()},
        )

    def validate(self, expected: Dict[str, Tuple[int, int, int, int]]) -> None:
        """Check names and dims against a freshly built layout."""

        missing = sorted(set(expected) - set(self.params))
        extra = sorted(set(self.params) - set(expected))
        if missing or extra:
            raise CheckpointError(f"checkpoint: parameter names differ (missing {missing}, unexpected {extra})")
        for name, dims in expected.items():
            if self.params[name].dims != dims:
                raise CheckpointError(f"checkpoint: {name} has dims {self.params[name].dims}, network expects {dims}")
            if self.momentum[name].shape != dims:
                raise CheckpointError(f"checkpoint: momentum buffer for {name} has dims {self.momentum[name].shape}")


__all__ = ["BIAS_SUFFIXES", "is_bias", "xavier_bound", "ParameterStore"]
