"""Saliency network: backbone, aggregation, attention and recursive prediction.

Levels are numbered 1..L with level 1 at full input resolution; list
attributes of :class:`ForwardTrace` are indexed by ``level - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .batchnorm import batchnorm
from .conv import ConvSpec, conv2d
from .errors import ArityError, ShapeError
from .models import Mode, NetworkConfig
from .params import ParameterStore
from .tensor import Tensor, add_broadcast, channel, concat, maxpool2, relu, sigmoid, softmax_channels

INPUT_CHANNELS = 3
LOGIT_CHANNELS = 2


@dataclass
class ForwardTrace:
    features: List[Tensor]
    aggregated: List[Tensor | None]
    attention: List[Tensor | None]
    logits: List[Tensor]
    saliency: Tensor
    final_level: int = 1

    def level_maps(self) -> List[np.ndarray]:
        """Foreground probability of every level's prediction, shape (n, h, w) each."""

        maps = []
        for logits in self.logits:
            shifted = logits.data - logits.data.max(axis=1, keepdims=True)
            exp = np.exp(shifted)
            maps.append((exp[:, 1] / exp.sum(axis=1)).astype(np.float64))
        return maps


# Parameter layout --------------------------------------------------------

def _backbone_conv_name(level: int, k: int) -> str:
    return f"backbone.stage{level}.conv{k}.weight"


def _backbone_bn_name(level: int, k: int) -> str:
    return f"backbone.stage{level}.bn{k}"


def _aggregation_inputs(config: NetworkConfig, level: int) -> int:
    d = config.agg_width
    if level == config.levels:
        return d
    carries_attention = config.attention_enabled and config.top_down
    return d + d + (1 if carries_attention else 0)


def _first_in_order(config: NetworkConfig, level: int) -> bool:
    return level == config.processing_order()[0]


def parameter_layout(config: NetworkConfig) -> Dict[str, Tuple[int, int, int, int]]:
    """Every trainable parameter name with its dims, in initialization order."""

    layout: Dict[str, Tuple[int, int, int, int]] = {}
    d = config.agg_width
    in_c = INPUT_CHANNELS
    for level, out_c in enumerate(config.backbone_channels, start=1):
        for k in range(1, config.stage_depth + 1):
            layout[_backbone_conv_name(level, k)] = (out_c, in_c, 3, 3)
            bn = _backbone_bn_name(level, k)
            layout[f"{bn}.gamma"] = (1, out_c, 1, 1)
            layout[f"{bn}.beta"] = (1, out_c, 1, 1)
            in_c = out_c
    for level, stride in zip(range(1, config.levels + 1), config.strides):
        prefix = f"level{level}"
        layout[f"{prefix}.w_r"] = (d, config.backbone_channels[level - 1], 3, 3)
        if stride > 1:
            layout[f"{prefix}.w_u"] = ConvSpec.upsample(d, d, stride).weight_dims
        if config.aggregation:
            layout[f"{prefix}.w_f"] = (d, _aggregation_inputs(config, level), 3, 3)
            layout[f"{prefix}.bn.gamma"] = (1, d, 1, 1)
            layout[f"{prefix}.bn.beta"] = (1, d, 1, 1)
        if config.attention_enabled:
            k = config.attention_kernel
            layout[f"{prefix}.w_a"] = (1, d + config.attention_stack_size(level), k, k)
            layout[f"{prefix}.b_a"] = (1, 1, 1, 1)
            s_in = 1 if _first_in_order(config, level) else LOGIT_CHANNELS
        else:
            s_in = d
        p = config.prediction_kernel
        layout[f"{prefix}.w_s"] = (LOGIT_CHANNELS, s_in, p, p)
        layout[f"{prefix}.b_s"] = (1, LOGIT_CHANNELS, 1, 1)
    return layout


def init_params(config: NetworkConfig, seed: int) -> ParameterStore:
    """Xavier-uniform weights, zero biases, unit BN scale; deterministic in ``seed``."""

    rng = np.random.default_rng(seed)
    store = ParameterStore()
    registered_bn = set()
    for name, dims in parameter_layout(config).items():
        if name.endswith((".gamma", ".beta")):
            bn_name = name.rsplit(".", 1)[0]
            if bn_name not in registered_bn:
                store.add_bn(bn_name, dims[1])
                registered_bn.add(bn_name)
        elif name.endswith((".b_a", ".b_s")):
            store.add(name, np.zeros(dims))
        else:
            store.xavier(name, dims, rng)
    return store


# Building blocks ----------------------------------------------------------

def _conv_bn_relu(x: Tensor, params: ParameterStore, weight: str, bn: str, mode: Mode) -> Tensor:
    w = params[weight]
    out_c, in_c, kh, _ = w.dims
    y = conv2d(x, w, None, ConvSpec.same(in_c, out_c, kh))
    y = batchnorm(y, params[f"{bn}.gamma"], params[f"{bn}.beta"], params.bn_states[bn], mode)
    return relu(y)


def _full_resolution(config: NetworkConfig, t: Tensor, what: str) -> None:
    if t.dims[2:] != config.input_hw:
        raise ShapeError(f"network: {what} has spatial dims {t.dims[2:]}, expected {config.input_hw}")


def backbone_forward(x: Tensor, params: ParameterStore, config: NetworkConfig, mode: Mode = Mode.TRAIN) -> List[Tensor]:
    """Side outputs f^1..f^L; stage l runs at stride 2^(l-1)."""

    n, c, h, w = x.dims
    if c != INPUT_CHANNELS or (h, w) != config.input_hw:
        raise ShapeError(
            f"backbone: input dims {x.dims} do not match (n, {INPUT_CHANNELS}, {config.input_hw[0]}, {config.input_hw[1]})"
        )
    taps: List[Tensor] = []
    h_t = x
    for level in range(1, config.levels + 1):
        if level > 1:
            h_t = maxpool2(h_t)
        for k in range(1, config.stage_depth + 1):
            h_t = _conv_bn_relu(h_t, params, _backbone_conv_name(level, k), _backbone_bn_name(level, k), mode)
        taps.append(h_t)
    return taps


def reduce_and_upsample(f_l: Tensor, params: ParameterStore, level: int, config: NetworkConfig) -> Tensor:
    """``w_u *_s (w_r * f^l)``: d channels at input resolution."""

    d = config.agg_width
    w_r = params[f"level{level}.w_r"]
    reduced = conv2d(f_l, w_r, None, ConvSpec.same(w_r.dims[1], d, 3))
    stride = config.strides[level - 1]
    if stride == 1:
        return reduced
    return conv2d(reduced, params[f"level{level}.w_u"], None, ConvSpec.upsample(d, d, stride))


def aggregate_level(
    f_l: Tensor,
    g_above: Tensor | None,
    a_above: Tensor | None,
    params: ParameterStore,
    level: int,
    config: NetworkConfig,
    mode: Mode = Mode.TRAIN,
) -> Tensor:
    """g^l = BN+ReLU of a 3x3 fusion of [upsampled f^l, g^(l+1), a^(l+1)] back to d channels."""

    top = level == config.levels
    wants_attention = config.attention_enabled and config.top_down and not top
    if top and (g_above is not None or a_above is not None):
        raise ArityError(f"aggregate: level {level} is the top level and takes no above-level inputs")
    if not top and g_above is None:
        raise ArityError(f"aggregate: level {level} needs g^{level + 1}")
    if wants_attention != (a_above is not None):
        need = "needs" if wants_attention else "takes no"
        raise ArityError(f"aggregate: level {level} {need} a^{level + 1} in this configuration")

    parts = [reduce_and_upsample(f_l, params, level, config)]
    for what, t in ((f"g^{level + 1}", g_above), (f"a^{level + 1}", a_above)):
        if t is not None:
            _full_resolution(config, t, what)
            parts.append(t)
    stacked = parts[0] if len(parts) == 1 else concat(parts)
    prefix = f"level{level}"
    return _conv_bn_relu(stacked, params, f"{prefix}.w_f", f"{prefix}.bn", mode)


def attention_level(
    g_l: Tensor,
    a_stack: Sequence[Tensor],
    params: ParameterStore,
    level: int,
    config: NetworkConfig,
) -> Tensor:
    """a^l = sigmoid(w_a * [g^l, stack...] + b_a), one channel.

    ``a_stack`` holds previously computed maps nearest level first; its
    length is fixed by the pyramid/single mode and the direction.
    """

    expected = config.attention_stack_size(level)
    if len(a_stack) != expected:
        raise ArityError(f"attention: level {level} expects {expected} stacked maps, got {len(a_stack)}")
    for idx, a in enumerate(a_stack):
        _full_resolution(config, a, f"stacked attention {idx}")
    inputs = concat([g_l, *a_stack]) if a_stack else g_l
    w_a = params[f"level{level}.w_a"]
    spec = ConvSpec.same(w_a.dims[1], 1, config.attention_kernel)
    return sigmoid(conv2d(inputs, w_a, params[f"level{level}.b_a"], spec))


def predict_level(
    a_l: Tensor,
    a_above: Tensor | None,
    s_above: Tensor | None,
    params: ParameterStore,
    level: int,
) -> Tensor:
    """s^l = w_s * (a^l + a^prev + s^prev) + b_s, or w_s * a^l + b_s for the first level."""

    w_s = params[f"level{level}.w_s"]
    b_s = params[f"level{level}.b_s"]
    out_c, in_c, k, _ = w_s.dims
    first = in_c == 1
    if first and (a_above is not None or s_above is not None):
        raise ArityError(f"predict: level {level} starts the recursion and takes no previous prediction")
    if not first and (a_above is None or s_above is None):
        raise ArityError(f"predict: level {level} needs both the previous attention map and prediction")
    if first:
        summed = a_l
    else:
        summed = add_broadcast(add_broadcast(s_above, a_l), a_above)
    return conv2d(summed, w_s, b_s, ConvSpec.same(in_c, out_c, k))


def classify_level(features: Tensor, params: ParameterStore, level: int) -> Tensor:
    """Per-level 1x1 classifier for the attention-free ablation variants."""

    w_s = params[f"level{level}.w_s"]
    out_c, in_c, k, _ = w_s.dims
    return conv2d(features, w_s, params[f"level{level}.b_s"], ConvSpec.same(in_c, out_c, k))


# Full forward ---------------------------------------------------------------

def forward(x: Tensor, params: ParameterStore, config: NetworkConfig, mode: Mode = Mode.TRAIN) -> ForwardTrace:
    feats = backbone_forward(x, params, config, mode)
    levels = config.levels
    aggregated: List[Tensor | None] = [None] * levels
    attention: List[Tensor | None] = [None] * levels
    logits: List[Tensor | None] = [None] * levels
    final_level = 1

    if not config.aggregation:
        for level in range(levels, 0, -1):
            side = reduce_and_upsample(feats[level - 1], params, level, config)
            logits[level - 1] = classify_level(side, params, level)
    elif not config.attention_enabled:
        for level in range(levels, 0, -1):
            g_above = aggregated[level] if level < levels else None
            g = aggregate_level(feats[level - 1], g_above, None, params, level, config, mode)
            aggregated[level - 1] = g
            logits[level - 1] = classify_level(g, params, level)
    elif config.top_down:
        for level in range(levels, 0, -1):
            top = level == levels
            g_above = None if top else aggregated[level]
            a_above = None if top else attention[level]
            g = aggregate_level(feats[level - 1], g_above, a_above, params, level, config, mode)
            stack = [attention[idx - 1] for idx in range(level + 1, levels + 1)][: config.attention_stack_size(level)]
            a = attention_level(g, stack, params, level, config)
            s_above = None if top else logits[level]
            aggregated[level - 1], attention[level - 1] = g, a
            logits[level - 1] = predict_level(a, a_above, s_above, params, level)
    else:
        for level in range(levels, 0, -1):
            g_above = aggregated[level] if level < levels else None
            aggregated[level - 1] = aggregate_level(feats[level - 1], g_above, None, params, level, config, mode)
        for level in range(1, levels + 1):
            first = level == 1
            stack = [attention[idx - 1] for idx in range(level - 1, 0, -1)][: config.attention_stack_size(level)]
            a = attention_level(aggregated[level - 1], stack, params, level, config)
            attention[level - 1] = a
            a_prev = None if first else attention[level - 2]
            s_prev = None if first else logits[level - 2]
            logits[level - 1] = predict_level(a, a_prev, s_prev, params, level)
        final_level = levels

    saliency = channel(softmax_channels(logits[final_level - 1]), 1)
    return ForwardTrace(
        features=feats,
        aggregated=aggregated,
        attention=attention,
        logits=[s for s in logits if s is not None],
        saliency=saliency,
        final_level=final_level,
    )


def predict_saliency(images: np.ndarray, params: ParameterStore, config: NetworkConfig) -> np.ndarray:
    """Inference-mode saliency maps for a ``(n, 3, H, W)`` batch, shape ``(n, H, W)``."""

    trace = forward(Tensor(images.astype(np.float32, copy=False)), params, config, Mode.INFER)
    return trace.saliency.data[:, 0].astype(np.float64)


__all__ = [
    "ForwardTrace",
    "parameter_layout",
    "init_params",
    "backbone_forward",
    "reduce_and_upsample",
    "aggregate_level",
    "attention_level",
    "predict_level",
    "classify_level",
    "forward",
    "predict_saliency",
]
