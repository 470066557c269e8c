"""RIFF/WAVE PCM16 mono 16 kHz reader and writer."""

import wave
from pathlib import Path
from typing import Union

import numpy as np

from app.dsp.spectrogram import SAMPLE_RATE_HZ, Waveform
from app.exceptions import AudioFormatError

PCM16_SCALE = 32768.0

PathLike = Union[str, Path]


def read_wav(path: PathLike) -> Waveform:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"WAV file not found: {path}")
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            frames = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as e:
        raise AudioFormatError(f"{path}: not a PCM RIFF/WAVE file ({e})") from e

    if channels != 1:
        raise AudioFormatError(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise AudioFormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    if rate != SAMPLE_RATE_HZ:
        raise AudioFormatError(f"{path}: expected {SAMPLE_RATE_HZ} Hz, got {rate} Hz")
    if not frames:
        raise AudioFormatError(f"{path}: no audio frames")

    pcm = np.frombuffer(frames, dtype="<i2")
    return Waveform(samples=pcm.astype(np.float64) / PCM16_SCALE)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    scaled = np.round(np.asarray(samples, dtype=np.float64) * PCM16_SCALE)
    return np.clip(scaled, -32768, 32767).astype("<i2")


def write_wav(path: PathLike, waveform: Waveform) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(waveform.sample_rate_hz)
        fh.writeframes(to_pcm16(waveform.samples).tobytes())
    return path
