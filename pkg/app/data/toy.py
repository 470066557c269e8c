"""Deterministic pseudo-synthesizer corpus.

Every pseudo-synthesizer renders the same kind of harmonic, syllabic source
and stamps it with its own spectral fingerprint: a feedforward comb filter,
a harmonic tilt, a notch in the added noise and a phase-jitter level.
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.signal import iirnotch, lfilter
from tqdm import tqdm

from app.artifacts import provenance, write_json
from app.config import config
from app.data.manifest import Manifest, ManifestEntry, write_manifest
from app.dsp import SAMPLE_RATE_HZ, Waveform, write_wav
from app.exceptions import ConfigError
from app.logger import logger
from app.schema import Split
from app.tensor.random import file_rng

MANIFEST_NAME = "manifest.csv"
SPEC_SIDECAR = "toy_spec.json"
NOTCH_Q = 5.0
PEAK = 0.9

PathLike = Union[str, Path]


class ToySynth(BaseModel):
    """Fingerprint of one pseudo-synthesizer."""

    name: str
    known: bool = True
    comb_period_ms: float = Field(..., gt=0.0)
    spectral_tilt_db_per_octave: float
    noise_notch_hz: float = Field(..., gt=0.0, lt=SAMPLE_RATE_HZ / 2)
    phase_jitter: float = Field(..., ge=0.0, description="Std of per-sample phase noise (rad)")

    @property
    def fingerprint(self) -> Tuple[float, float, float, float]:
        return (self.comb_period_ms, self.spectral_tilt_db_per_octave, self.noise_notch_hz, self.phase_jitter)


class ToySpec(BaseModel):
    synthesizers: List[ToySynth]
    f0_range_hz: Tuple[float, float] = (80.0, 300.0)
    harmonic_ceiling_hz: float = Field(4000.0, gt=0.0)
    envelope_hz: float = Field(4.0, gt=0.0, description="Syllabic amplitude-envelope rate")
    duration_s: float = Field(1.1, gt=0.0)
    comb_gain: float = Field(0.7, ge=0.0, le=1.0)
    noise_level: float = Field(0.05, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def _distinct(self) -> "ToySpec":
        prints = [s.fingerprint for s in self.synthesizers]
        if len(set(prints)) != len(prints):
            raise ValueError("pseudo-synthesizer fingerprints must be distinct")
        names = [s.name for s in self.synthesizers]
        if len(set(names)) != len(names):
            raise ValueError("pseudo-synthesizer names must be distinct")
        lo, hi = self.f0_range_hz
        if not 0 < lo < hi:
            raise ValueError(f"invalid f0 range {self.f0_range_hz}")
        return self

    def select(self, known: bool) -> List[ToySynth]:
        return [s for s in self.synthesizers if s.known == known]


def default_toy_spec(known_k: int = 6, unknown_k: int = 2, seed: int = 0) -> ToySpec:
    """Fingerprints on a fixed grid: known_00.., then unknown_00.., each with its own comb period."""
    synths = []
    for j in range(known_k + unknown_k):
        known = j < known_k
        index = j if known else j - known_k
        synths.append(
            ToySynth(
                name=f"{'known' if known else 'unknown'}_{index:02d}",
                known=known,
                comb_period_ms=round(0.8 + 0.45 * j, 3),
                spectral_tilt_db_per_octave=-2.0 - 2.0 * (j % 4),
                noise_notch_hz=500.0 + 350.0 * j,
                phase_jitter=0.02 + 0.04 * (j % 3),
            )
        )
    return ToySpec(synthesizers=synths, seed=seed)


def render(spec: ToySpec, synth: ToySynth, rng: np.random.Generator) -> Waveform:
    sr = SAMPLE_RATE_HZ
    n = int(round(spec.duration_s * sr))
    t = np.arange(n) / sr
    lo, hi = spec.f0_range_hz

    base = rng.uniform(lo, hi)
    drift = 0.08 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t + rng.uniform(0, 2 * np.pi))
    f0 = np.clip(base * (1.0 + drift), lo, hi)
    phase = 2 * np.pi * np.cumsum(f0) / sr

    # top harmonic stays under the ceiling at this clip's highest pitch
    n_harmonics = max(1, int(spec.harmonic_ceiling_hz // f0.max()))
    source = np.zeros(n)
    for h in range(1, n_harmonics + 1):
        amplitude = 10.0 ** (synth.spectral_tilt_db_per_octave * np.log2(h) / 20.0)
        jitter = synth.phase_jitter * rng.standard_normal(n)
        source += amplitude * np.sin(h * phase + rng.uniform(0, 2 * np.pi) + jitter)

    envelope = 0.55 + 0.45 * np.sin(2 * np.pi * spec.envelope_hz * t + rng.uniform(0, 2 * np.pi))
    voiced = source * envelope

    delay = max(1, int(round(synth.comb_period_ms * sr / 1000.0)))
    comb = np.zeros(delay + 1)
    comb[0], comb[delay] = 1.0, spec.comb_gain
    voiced = lfilter(comb, [1.0], voiced)

    b, a = iirnotch(synth.noise_notch_hz, NOTCH_Q, fs=sr)
    noise = lfilter(b, a, rng.standard_normal(n))
    signal = voiced / (np.max(np.abs(voiced)) + 1e-12) + spec.noise_level * noise
    return Waveform(samples=PEAK * signal / np.max(np.abs(signal)))


def _plan(
    spec: ToySpec, known_k: int, unknown_k: int, per_class_train: int, per_class_test: int
) -> List[Tuple[ToySynth, Split, int]]:
    known = spec.select(True)
    unknown = spec.select(False)
    if known_k < 2:
        raise ConfigError(f"need at least two known pseudo-synthesizers, got {known_k}")
    if known_k > len(known) or unknown_k > len(unknown):
        raise ConfigError(
            f"toy corpus defines {len(known)} known / {len(unknown)} unknown synthesizers, "
            f"asked for {known_k} / {unknown_k}"
        )
    jobs: List[Tuple[ToySynth, Split, int]] = []
    for synth in known[:known_k]:
        jobs += [(synth, Split.TRAIN, i) for i in range(per_class_train)]
    for synth in known[:known_k] + unknown[:unknown_k]:
        jobs += [(synth, Split.TEST, i) for i in range(per_class_test)]
    return jobs


def gen_toy(
    spec: ToySpec,
    known_k: int,
    unknown_k: int,
    per_class_train: int,
    per_class_test: int,
    out_dir: PathLike,
    threads: Optional[int] = None,
) -> Manifest:
    """Write the corpus WAVs, ``manifest.csv`` and ``toy_spec.json`` under ``out_dir``.

    File k of the plan is rendered from seed ``spec.seed ^ k``, so the bytes do
    not depend on the worker count.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = _plan(spec, known_k, unknown_k, per_class_train, per_class_test)

    def _one(job_index: int) -> ManifestEntry:
        synth, split, i = jobs[job_index]
        rel = f"{split.value}/{synth.name}/{synth.name}_{i:04d}.wav"
        write_wav(out_dir / rel, render(spec, synth, file_rng(spec.seed, job_index)))
        return ManifestEntry(filepath=rel, synthesizer=synth.name, split=split, known=synth.known)

    workers = threads or config.runtime.worker_threads
    with ThreadPoolExecutor(max_workers=workers) as pool:
        entries = list(tqdm(pool.map(_one, range(len(jobs))), total=len(jobs), desc="gen-toy", disable=None))

    manifest = Manifest(entries=entries, root=out_dir)
    run = {
        "known_k": known_k,
        "unknown_k": unknown_k,
        "per_class_train": per_class_train,
        "per_class_test": per_class_test,
    }
    stamp = provenance(run, spec.seed)
    write_manifest(out_dir / MANIFEST_NAME, manifest, stamp)
    write_json(out_dir / SPEC_SIDECAR, {**stamp, "toy_spec": spec.model_dump(mode="json")})
    n_train = sum(1 for _, split, _ in jobs if split == Split.TRAIN)
    logger.info(f"Generated {len(jobs)} toy files ({n_train} train, {len(jobs) - n_train} test) in {out_dir}")
    return manifest
