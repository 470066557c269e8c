"""Per-synthesizer sample counts of the reference attribution corpus.

Used for baseline arithmetic; the audio itself is not distributed.
"""

from typing import List

import numpy as np
from pydantic import BaseModel, Field


class CorpusClass(BaseModel):
    name: str
    train: int = Field(..., ge=0)
    test: int = Field(..., ge=0)
    known: bool


class CorpusCounts(BaseModel):
    classes: List[CorpusClass]

    @property
    def known(self) -> List[CorpusClass]:
        return [c for c in self.classes if c.known]

    @property
    def unknown(self) -> List[CorpusClass]:
        return [c for c in self.classes if not c.known]

    @property
    def class_names(self) -> List[str]:
        return [c.name for c in self.known]

    def train_counts(self) -> np.ndarray:
        return np.array([c.train for c in self.known], dtype=np.int64)

    def test_truths(self, open_set: bool = False) -> np.ndarray:
        """Known test labels by class index; unknown test samples appended as -1 when open_set."""
        parts = [np.full(c.test, i, dtype=np.int64) for i, c in enumerate(self.known)]
        if open_set:
            parts += [np.full(c.test, -1, dtype=np.int64) for c in self.unknown]
        return np.concatenate(parts)


_REFERENCE = [
    ("FastPitch", 1000, 1500, True),
    ("FastSpeech2", 500, 300, True),
    ("Glow-TTS", 1000, 1500, True),
    ("gTTS", 1000, 1500, True),
    ("Tacotron", 1000, 1500, True),
    ("Tacotron 2", 500, 300, True),
    ("TalkNet", 1000, 1500, True),
    ("Riva", 1000, 1000, True),
    ("Mixer-TTS", 0, 300, False),
    ("SpeedySpeech", 0, 300, False),
    ("VITS", 0, 300, False),
]


def table_one_counts() -> CorpusCounts:
    return CorpusCounts(
        classes=[CorpusClass(name=n, train=tr, test=te, known=k) for n, tr, te, k in _REFERENCE]
    )
