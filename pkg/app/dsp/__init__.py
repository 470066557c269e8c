from app.dsp.cache import load_spectrogram, save_spectrogram
from app.dsp.spectrogram import (
    SAMPLE_RATE_HZ,
    SPEC_SIZE,
    Spectrogram,
    Waveform,
    frame_count,
    hann_window,
    shape_and_normalize,
    spectrogram,
    stft_magnitude,
    to_decibels,
)
from app.dsp.wav import read_wav, write_wav

__all__ = [
    "SAMPLE_RATE_HZ",
    "SPEC_SIZE",
    "Spectrogram",
    "Waveform",
    "frame_count",
    "hann_window",
    "load_spectrogram",
    "read_wav",
    "save_spectrogram",
    "shape_and_normalize",
    "spectrogram",
    "stft_magnitude",
    "to_decibels",
    "write_wav",
]
