"""Waveform -> 128x128 normalized spectrogram.

32 ms periodic Hann window (512 samples at 16 kHz), 8 ms shift (128
samples), 512-point FFT, magnitude in dB with a -200 dB floor, lowest 128
frequency bins by first 128 frames, min-max normalized per spectrogram.
"""

from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, field_validator

from app.config import DspSettings
from app.exceptions import InvalidArgumentError, TooShortError

SAMPLE_RATE_HZ = 16000
SPEC_SIZE = 128
DB_FLOOR_MAGNITUDE = 1e-10
DB_FLOOR = -200.0


class Waveform(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ

    @field_validator("samples", mode="before")
    @classmethod
    def _as_float_vector(cls, value) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float64).reshape(-1)
        if arr.size == 0:
            raise ValueError("waveform has no samples")
        return arr

    @field_validator("sample_rate_hz")
    @classmethod
    def _sixteen_khz(cls, value: int) -> int:
        if value != SAMPLE_RATE_HZ:
            raise ValueError(f"sample rate must be {SAMPLE_RATE_HZ} Hz, got {value}")
        return value

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


class Spectrogram(BaseModel):
    """pixels[f, t]: row 0 is the lowest frequency band, columns are 8 ms frames."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    pixels: np.ndarray

    @field_validator("pixels", mode="before")
    @classmethod
    def _unit_square(cls, value) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float32)
        if arr.shape != (SPEC_SIZE, SPEC_SIZE):
            raise ValueError(f"spectrogram must be {SPEC_SIZE}x{SPEC_SIZE}, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("spectrogram pixels must lie in [0, 1]")
        return arr


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window, w[k] = 0.5 (1 - cos(2 pi k / n))."""
    if n < 2:
        raise InvalidArgumentError(f"window length must be >= 2, got {n}")
    k = np.arange(n, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def frame_count(length: int, win_len: int = 512, hop: int = 128) -> int:
    if length < win_len:
        return 0
    return (length - win_len) // hop + 1


def stft_magnitude(
    w: Waveform, win_len: int = 512, hop: int = 128, fft_len: int = 512
) -> np.ndarray:
    """One-sided STFT magnitudes, frames x (fft_len // 2 + 1); the partial tail frame is dropped."""
    samples = w.samples
    if samples.size < win_len:
        raise TooShortError(
            f"signal has {samples.size} samples, shorter than the {win_len}-sample window"
        )
    if hop < 1:
        raise InvalidArgumentError(f"hop must be positive, got {hop}")
    frames = sliding_window_view(samples, win_len)[::hop]
    windowed = frames * hann_window(win_len)
    return np.abs(np.fft.rfft(windowed, n=fft_len, axis=-1))


def to_decibels(mag: np.ndarray) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.asarray(mag, dtype=np.float64), DB_FLOOR_MAGNITUDE))


def _crop_bins(db: np.ndarray, freq_crop: str) -> np.ndarray:
    bins = db.shape[1]
    if bins <= SPEC_SIZE:
        start = 0
    elif freq_crop == "low":
        start = 0
    elif freq_crop == "high":
        start = bins - SPEC_SIZE
    elif freq_crop == "center":
        start = (bins - SPEC_SIZE) // 2
    else:
        raise InvalidArgumentError(f"unknown frequency crop {freq_crop!r}")
    return db[:, start : start + SPEC_SIZE]


def shape_and_normalize(db: np.ndarray, freq_crop: str = "low") -> Spectrogram:
    """Crop/pad a frames x bins dB grid to 128x128 (frequency rows, time columns) in [0, 1]."""
    db = np.asarray(db, dtype=np.float64)
    if db.ndim != 2 or db.shape[0] < 1:
        raise InvalidArgumentError(f"expected a frames x bins grid with >= 1 frame, got {db.shape}")
    grid = np.full((SPEC_SIZE, SPEC_SIZE), DB_FLOOR, dtype=np.float64)
    cropped = _crop_bins(db, freq_crop)[:SPEC_SIZE]
    grid[: cropped.shape[1], : cropped.shape[0]] = cropped.T

    lo, hi = grid.min(), grid.max()
    if hi == lo:
        return Spectrogram(pixels=np.zeros((SPEC_SIZE, SPEC_SIZE), dtype=np.float32))
    return Spectrogram(pixels=((grid - lo) / (hi - lo)).astype(np.float32))


def spectrogram(w: Waveform, settings: Optional[DspSettings] = None) -> Spectrogram:
    settings = settings or DspSettings()
    mag = stft_magnitude(w, settings.win_len, settings.hop, settings.fft_len)
    return shape_and_normalize(to_decibels(mag), settings.freq_crop)
