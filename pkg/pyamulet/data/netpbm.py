"""Binary PPM (P6) and PGM (P5) codec, 8-bit only."""
from __future__ import annotations

from pathlib import Path
from typing import Tuple

import numpy as np

from ..errors import NetpbmError

_WHITESPACE = b" \t\r\n\v\f"


def _read_token(buf: bytes, offset: int) -> Tuple[bytes, int]:
    while offset < len(buf):
        byte = buf[offset : offset + 1]
        if byte == b"#":
            end = buf.find(b"\n", offset)
            offset = len(buf) if end < 0 else end + 1
        elif byte in _WHITESPACE:
            offset += 1
        else:
            break
    start = offset
    while offset < len(buf) and buf[offset : offset + 1] not in _WHITESPACE and buf[offset : offset + 1] != b"#":
        offset += 1
    if start == offset:
        raise NetpbmError("netpbm: header ended early", start)
    return buf[start:offset], offset


def _read_int(buf: bytes, offset: int, field: str) -> Tuple[int, int]:
    token, end = _read_token(buf, offset)
    if not token.isdigit():
        raise NetpbmError(f"netpbm: {field} {token!r} is not a decimal number", end - len(token))
    return int(token), end


def decode(buf: bytes, magic: bytes) -> np.ndarray:
    """Parse a P5/P6 buffer into uint8 of shape (h, w) or (h, w, 3)."""

    token, offset = _read_token(buf, 0)
    if token != magic:
        raise NetpbmError(f"netpbm: expected magic {magic.decode()}, found {token!r}", 0)
    width, offset = _read_int(buf, offset, "width")
    height, offset = _read_int(buf, offset, "height")
    maxval_at = offset
    maxval, offset = _read_int(buf, offset, "maxval")
    if width <= 0 or height <= 0:
        raise NetpbmError(f"netpbm: image size {width}x{height} is empty", maxval_at)
    if maxval != 255:
        raise NetpbmError(f"netpbm: unsupported maxval {maxval}, only 255 is accepted", maxval_at)
    if offset >= len(buf) or buf[offset : offset + 1] not in _WHITESPACE:
        raise NetpbmError("netpbm: missing whitespace after maxval", offset)
    offset += 1
    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    available = len(buf) - offset
    if available < expected:
        raise NetpbmError(f"netpbm: payload truncated, expected {expected} bytes, found {available}", offset)
    pixels = np.frombuffer(buf, dtype=np.uint8, count=expected, offset=offset)
    return pixels.reshape((height, width, 3) if channels == 3 else (height, width)).copy()


def encode(pixels: np.ndarray) -> bytes:
    height, width = pixels.shape[:2]
    magic = b"P6" if pixels.ndim == 3 else b"P5"
    header = b"%s\n%d %d\n255\n" % (magic, width, height)
    return header + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def quantize(values: np.ndarray) -> np.ndarray:
    """Map reals in [0, 1] onto 0..255."""

    return np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def read_ppm(path: str | Path) -> np.ndarray:
    """RGB image as float32 (3, h, w) in [0, 1]."""

    pixels = decode(Path(path).read_bytes(), b"P6")
    return (pixels.transpose(2, 0, 1) / 255.0).astype(np.float32)


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise NetpbmError(f"netpbm: PPM needs a (3, h, w) image, got {image.shape}")
    Path(path).write_bytes(encode(quantize(image).transpose(1, 2, 0)))


def read_pgm(path: str | Path, dtype=np.float32) -> np.ndarray:
    """Single-channel map as (h, w) in [0, 1], float32 unless ``dtype`` says otherwise."""

    return (decode(Path(path).read_bytes(), b"P5") / 255.0).astype(dtype)


def write_pgm(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim == 3 and values.shape[0] == 1:
        values = values[0]
    if values.ndim != 2:
        raise NetpbmError(f"netpbm: PGM needs an (h, w) map, got {values.shape}")
    Path(path).write_bytes(encode(quantize(values)))


__all__ = ["decode", "encode", "quantize", "read_ppm", "write_ppm", "read_pgm", "write_pgm"]
