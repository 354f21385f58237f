"""Tab-separated dataset manifests pairing images with masks."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List

import numpy as np

from ..errors import ManifestError
from ..models import ImageSample
from .netpbm import read_pgm, read_ppm, write_pgm, write_ppm

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.tsv"
IMAGE_DIR = "images"
MASK_DIR = "masks"


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: Path
    mask_path: Path


def write_manifest(samples: Iterable[ImageSample], directory: str | Path) -> Path:
    """Write ``images/<id>.ppm``, ``masks/<id>.pgm`` and the manifest under ``directory``."""

    directory = Path(directory)
    (directory / IMAGE_DIR).mkdir(parents=True, exist_ok=True)
    (directory / MASK_DIR).mkdir(parents=True, exist_ok=True)
    lines: List[str] = []
    for sample in samples:
        if "\t" in sample.id or "\n" in sample.id:
            raise ValueError(f"manifest: sample id {sample.id!r} contains a tab or newline")
        image_rel = f"{IMAGE_DIR}/{sample.id}.ppm"
        mask_rel = f"{MASK_DIR}/{sample.id}.pgm"
        write_ppm(directory / image_rel, sample.image)
        write_pgm(directory / mask_rel, sample.mask)
        lines.append(f"{sample.id}\t{image_rel}\t{mask_rel}\n")
    path = directory / MANIFEST_NAME
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.writelines(lines)
    logger.info("manifest: wrote %d entries to %s", len(lines), path)
    return path


def read_manifest_entries(path: str | Path) -> List[ManifestEntry]:
    """Parse the manifest; relative paths resolve against its directory."""

    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError([str(path)], f"cannot read manifest ({exc.strerror})") from exc
    base = path.parent
    entries: List[ManifestEntry] = []
    for number, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\r").split("\t")
        if len(fields) != 3:
            raise ManifestError([f"line {number}"], "expected id<TAB>image<TAB>mask on")
        sample_id, image_rel, mask_rel = fields
        entries.append(ManifestEntry(sample_id, base / image_rel, base / mask_rel))
    return entries


def read_manifest(path: str | Path) -> List[ImageSample]:
    """Load every sample; masks are binarized at 0.5."""

    entries = read_manifest_entries(path)
    missing = [e.id for e in entries if not (e.image_path.is_file() and e.mask_path.is_file())]
    if missing:
        raise ManifestError(missing)
    samples = []
    for entry in entries:
        image = read_ppm(entry.image_path)
        mask = (read_pgm(entry.mask_path) >= 0.5).astype(np.float32)
        samples.append(ImageSample(image=image, mask=mask, id=entry.id))
    return samples


def prediction_path(directory: str | Path, sample_id: str) -> Path:
    return Path(directory) / f"{sample_id}.pgm"


def save_prediction(directory: str | Path, sample_id: str, values: np.ndarray) -> Path:
    """Write one saliency map as ``<directory>/<id>.pgm``, quantized to 8 bits."""

    path = prediction_path(directory, sample_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_pgm(path, values)
    return path


__all__ = [
    "MANIFEST_NAME",
    "ManifestEntry",
    "write_manifest",
    "read_manifest_entries",
    "read_manifest",
    "prediction_path",
    "save_prediction",
]
