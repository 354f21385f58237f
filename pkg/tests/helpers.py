from __future__ import annotations

from pyamulet.config import RunConfig
from pyamulet.models import DataConfig, LossConfig, NetworkConfig, OptimConfig, SynthSpec


def tiny_network(levels: int = 2, hw: int = 8, **overrides) -> NetworkConfig:
    return NetworkConfig(
        levels=levels,
        input_hw=(hw, hw),
        backbone_channels=[4] * levels,
        agg_width=4,
        stage_depth=1,
        **overrides,
    )


def tiny_run_config(max_iters: int = 10) -> RunConfig:
    return RunConfig(
        network=tiny_network(hw=16),
        loss=LossConfig(),
        optim=OptimConfig(batch_size=2, max_iters=max_iters, plateau_window=4),
        data=DataConfig(
            checkpoint_every=5,
            log_every=5,
            synth=SynthSpec(image_hw=(16, 16), noise_amplitude=0.02),
        ),
    )
