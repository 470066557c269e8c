"""Spectrogram cache files.

Layout: b"CATSPEC1", rows and cols as little-endian u32, then rows*cols
little-endian float32 values in row-major order.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from app.dsp.spectrogram import Spectrogram
from app.exceptions import DataError

SPEC_MAGIC = b"CATSPEC1"
_DIMS = struct.Struct("<II")

PathLike = Union[str, Path]


def encode_spectrogram(spec: Spectrogram) -> bytes:
    rows, cols = spec.pixels.shape
    body = np.ascontiguousarray(spec.pixels, dtype="<f4").tobytes()
    return SPEC_MAGIC + _DIMS.pack(rows, cols) + body


def decode_spectrogram(blob: bytes, source: str = "<bytes>") -> Spectrogram:
    head = len(SPEC_MAGIC) + _DIMS.size
    if len(blob) < head or blob[: len(SPEC_MAGIC)] != SPEC_MAGIC:
        raise DataError(f"{source}: not a CATSPEC1 spectrogram file")
    rows, cols = _DIMS.unpack_from(blob, len(SPEC_MAGIC))
    expected = head + 4 * rows * cols
    if len(blob) != expected:
        raise DataError(f"{source}: expected {expected} bytes for {rows}x{cols}, found {len(blob)}")
    pixels = np.frombuffer(blob, dtype="<f4", offset=head).reshape(rows, cols)
    try:
        return Spectrogram(pixels=pixels.astype(np.float32))
    except ValueError as e:
        raise DataError(f"{source}: {e}") from e


def save_spectrogram(path: PathLike, spec: Spectrogram) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_spectrogram(spec))
    return path


def load_spectrogram(path: PathLike) -> Spectrogram:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"spectrogram cache not found: {path}")
    return decode_spectrogram(path.read_bytes(), str(path))
