"""Dataset-level evaluation reports."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .data.manifest import prediction_path, read_manifest_entries
from .data.netpbm import read_pgm
from .errors import InputError, ManifestError, ReportError
from .metrics import PRCurve, f_adaptive, f_max, f_measure, mae, pr_curve, s_measure
from .telemetry import RunTelemetry

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("id", "f_adaptive", "f_max", "mae", "s_measure")
MEAN_ID = "MEAN"


@dataclass(frozen=True)
class ImageScores:
    id: str
    f_adaptive: float
    f_max: float
    mae: float
    s_measure: float

    def to_row(self) -> str:
        return f"{self.id},{self.f_adaptive:.6f},{self.f_max:.6f},{self.mae:.6f},{self.s_measure:.6f}"


@dataclass
class EvalReport:
    rows: List[ImageScores]
    curve: PRCurve
    excluded_from_recall: int = 0

    def mean(self) -> ImageScores:
        if not self.rows:
            raise InputError("eval: report has no rows")
        return ImageScores(
            MEAN_ID,
            float(np.mean([r.f_adaptive for r in self.rows])),
            float(np.mean([r.f_max for r in self.rows])),
            float(np.mean([r.mae for r in self.rows])),
            float(np.mean([r.s_measure for r in self.rows])),
        )

    @property
    def curve_f_max(self) -> float:
        """F_max of the dataset-mean PR curve (the other common convention)."""

        return float(np.max(f_measure(self.curve.precision, self.curve.recall)))

    def to_csv(self) -> str:
        lines = [",".join(REPORT_COLUMNS)]
        lines.extend(row.to_row() for row in self.rows)
        lines.append(self.mean().to_row())
        return "\n".join(lines) + "\n"

    def to_pr_csv(self) -> str:
        lines = ["threshold,precision,recall"]
        for t, p, r in zip(self.curve.thresholds, self.curve.precision, self.curve.recall):
            lines.append(f"{t:.6f},{p:.6f},{r:.6f}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8", newline="\n")
        return path

    def write_pr_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_pr_csv(), encoding="utf-8", newline="\n")
        return path


def score_image(pred: np.ndarray, gt: np.ndarray, image_id: str) -> ImageScores:
    return ImageScores(image_id, f_adaptive(pred, gt), f_max(pred, gt), mae(pred, gt), s_measure(pred, gt))


def evaluate_arrays(
    preds: Sequence[np.ndarray],
    gts: Sequence[np.ndarray],
    ids: Sequence[str] | None = None,
    *,
    jobs: int = 1,
    telemetry: RunTelemetry | None = None,
) -> EvalReport:
    """Score prediction/ground-truth pairs; ``jobs > 1`` scores images on a thread pool."""

    if len(preds) != len(gts):
        raise InputError(f"eval: {len(preds)} predictions for {len(gts)} ground truths")
    ids = list(ids) if ids is not None else [f"{idx:05d}" for idx in range(len(preds))]

    def score(idx: int) -> ImageScores:
        if telemetry is None:
            return score_image(preds[idx], gts[idx], ids[idx])
        with telemetry.time_image("evaluate"):
            return score_image(preds[idx], gts[idx], ids[idx])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(score, range(len(preds))))
    else:
        rows = [score(idx) for idx in range(len(preds))]
    excluded = sum(1 for gt in gts if not np.any(np.asarray(gt) == 1))
    return EvalReport(rows=rows, curve=pr_curve(list(preds), list(gts)), excluded_from_recall=excluded)


def evaluate_levels(
    level_maps: Sequence[np.ndarray],
    gts: Sequence[np.ndarray],
    ids: Sequence[str] | None = None,
    *,
    jobs: int = 1,
) -> List[EvalReport]:
    """One report per network level; ``level_maps[l]`` has dims (n, h, w)."""

    return [evaluate_arrays(list(maps), gts, ids, jobs=jobs) for maps in level_maps]


def evaluate_dataset(
    pred_dir: str | Path,
    manifest: str | Path,
    *,
    jobs: int = 1,
    telemetry: RunTelemetry | None = None,
) -> EvalReport:
    """Score ``<pred_dir>/<id>.pgm`` against every mask listed in ``manifest``."""

    entries = read_manifest_entries(manifest)
    if not entries:
        raise ManifestError([str(manifest)], "no samples listed in")
    missing_gt = [e.id for e in entries if not e.mask_path.is_file()]
    if missing_gt:
        raise ManifestError(missing_gt)
    missing = [e.id for e in entries if not prediction_path(pred_dir, e.id).is_file()]
    if missing:
        logger.error("eval: %d of %d predictions missing", len(missing), len(entries))
        raise ReportError(missing)

    preds = [read_pgm(prediction_path(pred_dir, e.id), dtype=np.float64) for e in entries]
    gts = [(read_pgm(e.mask_path) >= 0.5).astype(np.float64) for e in entries]
    report = evaluate_arrays(preds, gts, [e.id for e in entries], jobs=jobs, telemetry=telemetry)
    mean = report.mean()
    logger.info(
        "eval: %d images, F_adaptive %.4f F_max %.4f MAE %.4f S %.4f",
        len(report.rows),
        mean.f_adaptive,
        mean.f_max,
        mean.mae,
        mean.s_measure,
    )
    return report


__all__ = [
    "REPORT_COLUMNS",
    "MEAN_ID",
    "ImageScores",
    "EvalReport",
    "score_image",
    "evaluate_arrays",
    "evaluate_levels",
    "evaluate_dataset",
]
