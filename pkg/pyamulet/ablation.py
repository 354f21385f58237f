"""Variant-by-seed ablation runs on a held-out split."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .errors import ConfigError, InputError
from .evaluation import evaluate_arrays
from .models import VARIANT_LABELS, ImageSample
from .predict import predict_samples
from .training import train

logger = logging.getLogger(__name__)

ABLATION_FILE = "ablation.csv"
MEDIANS_FILE = "ablation_medians.csv"


@dataclass(frozen=True)
class AblationRow:
    variant: str
    seed: int
    f_max: float
    mae: float
    s_measure: float
    parameters: int

    def to_row(self) -> str:
        return f"{self.variant},{self.seed},{self.f_max:.6f},{self.mae:.6f},{self.s_measure:.6f},{self.parameters}"


def parse_variants(text: str) -> List[str]:
    labels = [label.strip().lower() for label in text.split(",") if label.strip()]
    if not labels:
        raise ConfigError("ablate: no variants given", "variants")
    unknown = [label for label in labels if label not in VARIANT_LABELS]
    if unknown:
        raise ConfigError(f"ablate: unknown variant(s) {', '.join(unknown)}", "variants")
    return labels


def split_holdout(samples: Sequence[ImageSample], fraction: float) -> Tuple[List[ImageSample], List[ImageSample]]:
    """Last ``fraction`` of the samples by index are held out."""

    held = int(round(len(samples) * fraction))
    if fraction > 0:
        held = max(held, 1)
    if held >= len(samples):
        raise InputError(f"ablate: {len(samples)} samples leave nothing to train on with holdout {fraction}")
    cut = len(samples) - held
    return list(samples[:cut]), list(samples[cut:])


def run_ablation(
    samples: Sequence[ImageSample],
    config: RunConfig,
    variants: Sequence[str],
    seeds: int,
    *,
    jobs: int = 1,
) -> List[AblationRow]:
    """Train every variant once per seed with shared hyperparameters and score the held-out split."""

    if seeds < 1:
        raise ConfigError(f"ablate: seeds must be >= 1, got {seeds}", "seeds")
    networks = {label: config.network.for_variant(label) for label in variants}
    train_split, test_split = split_holdout(samples, config.data.holdout_fraction)
    if not test_split:
        raise InputError("ablate: held-out split is empty")
    gts = [s.mask[0].astype(np.float64) for s in test_split]
    ids = [s.id for s in test_split]
    rows: List[AblationRow] = []
    for label in variants:
        net_cfg = networks[label]
        for offset in range(seeds):
            seed = config.data.seed + offset
            logger.info("ablate: variant %s seed %d on %d training samples", label, seed, len(train_split))
            result = train(
                train_split,
                net_cfg,
                config.loss,
                config.optim,
                config.augment,
                seed,
                log_every=config.data.log_every,
            )
            predictions = predict_samples(test_split, result.store, net_cfg, jobs=jobs)
            report = evaluate_arrays([p.saliency for p in predictions], gts, ids, jobs=jobs)
            mean = report.mean()
            rows.append(
                AblationRow(label, seed, mean.f_max, mean.mae, mean.s_measure, result.store.parameter_count())
            )
    return rows


def medians(rows: Sequence[AblationRow]) -> Dict[str, Tuple[float, float, float]]:
    grouped: Dict[str, List[AblationRow]] = {}
    for row in rows:
        grouped.setdefault(row.variant, []).append(row)
    return {
        label: (
            float(np.median([r.f_max for r in group])),
            float(np.median([r.mae for r in group])),
            float(np.median([r.s_measure for r in group])),
        )
        for label, group in grouped.items()
    }


def write_ablation(rows: Sequence[AblationRow], out_dir: str | Path) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = ["variant,seed,f_max,mae,s_measure,parameters", *(row.to_row() for row in rows)]
    table_path = out_dir / ABLATION_FILE
    table_path.write_text("\n".join(table) + "\n", encoding="utf-8", newline="\n")
    summary = ["variant,f_max,mae,s_measure"]
    for label, (f, m, s) in medians(rows).items():
        summary.append(f"{label},{f:.6f},{m:.6f},{s:.6f}")
    medians_path = out_dir / MEDIANS_FILE
    medians_path.write_text("\n".join(summary) + "\n", encoding="utf-8", newline="\n")
    return table_path, medians_path


__all__ = [
    "ABLATION_FILE",
    "MEDIANS_FILE",
    "AblationRow",
    "parse_variants",
    "split_holdout",
    "run_ablation",
    "medians",
    "write_ablation",
]
