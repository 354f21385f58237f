"""PyAmulet public API."""
from .config import RunConfig
from .models import (
    AugmentSpec,
    AttentionDirection,
    DataConfig,
    ImageSample,
    LossConfig,
    Mode,
    NetworkConfig,
    OptimConfig,
    SynthSpec,
)
from .network import ForwardTrace, forward, init_params, predict_saliency
from .losses import class_balance, level_loss, total_loss
from .optim import sgd_step
from .augment import augment
from .training import TrainingLog, train
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .metrics import f_adaptive, f_max, f_measure, mae, pr_curve, s_measure
from .evaluation import EvalReport, evaluate_arrays, evaluate_dataset
from .data.synth import generate_synthetic
from .data.manifest import read_manifest, write_manifest

__all__ = [
    "RunConfig",
    "AugmentSpec",
    "AttentionDirection",
    "DataConfig",
    "ImageSample",
    "LossConfig",
    "Mode",
    "NetworkConfig",
    "OptimConfig",
    "SynthSpec",
    "ForwardTrace",
    "forward",
    "init_params",
    "predict_saliency",
    "class_balance",
    "level_loss",
    "total_loss",
    "sgd_step",
    "augment",
    "TrainingLog",
    "train",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "f_adaptive",
    "f_max",
    "f_measure",
    "mae",
    "pr_curve",
    "s_measure",
    "EvalReport",
    "evaluate_arrays",
    "evaluate_dataset",
    "generate_synthetic",
    "read_manifest",
    "write_manifest",
]
