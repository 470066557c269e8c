from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from app.artifacts import provenance, read_json, write_json
from app.config import DspSettings, config
from app.data.manifest import Manifest, ManifestEntry
from app.dsp import Spectrogram, load_spectrogram, read_wav, save_spectrogram, spectrogram
from app.exceptions import DataError
from app.logger import logger
from app.schema import Split

UNKNOWN_INDEX = -1
CACHE_SUFFIX = ".spec"
PREP_SIDECAR = "prep_run.json"

PathLike = Union[str, Path]


class LabeledSet(BaseModel):
    """Spectrograms with their labels; y is the known-class index or -1 for unknown synthesizers."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    y: np.ndarray
    paths: List[str] = Field(default_factory=list)
    synthesizers: List[str] = Field(default_factory=list)
    known: np.ndarray
    class_names: List[str] = Field(default_factory=list)

    def __len__(self) -> int:
        return int(self.y.shape[0])

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def subset(self, index) -> "LabeledSet":
        index = np.asarray(index, dtype=np.int64)
        return LabeledSet(
            x=self.x[index],
            y=self.y[index],
            paths=[self.paths[i] for i in index],
            synthesizers=[self.synthesizers[i] for i in index],
            known=self.known[index],
            class_names=list(self.class_names),
        )

    def class_counts(self) -> np.ndarray:
        labels = self.y[self.y >= 0]
        return np.bincount(labels, minlength=self.num_classes)


def cache_path(cache_dir: Path, entry: ManifestEntry) -> Path:
    return cache_dir / Path(entry.filepath).with_suffix(CACHE_SUFFIX)


def _cache_matches(cache_dir: Optional[Path], settings: DspSettings) -> bool:
    if cache_dir is None or not (cache_dir / PREP_SIDECAR).exists():
        return False
    recorded = read_json(cache_dir / PREP_SIDECAR).get("dsp", {})
    if recorded != settings.model_dump(mode="json"):
        logger.warning(f"Spectrogram cache in {cache_dir} was built with different DSP settings; recomputing")
        return False
    return True


def _compute(manifest: Manifest, entry: ManifestEntry, settings: DspSettings) -> Spectrogram:
    return spectrogram(read_wav(manifest.resolve(entry)), settings)


def prepare_cache(
    manifest: Manifest,
    cache_dir: PathLike,
    settings: Optional[DspSettings] = None,
    threads: Optional[int] = None,
    run_config: Optional[dict] = None,
    seed: Optional[int] = None,
) -> int:
    """Write one CATSPEC1 file per manifest entry and a sidecar describing the run."""
    settings = settings or config.dsp
    cache_dir = Path(cache_dir)
    entries = manifest.entries
    workers = threads or config.runtime.worker_threads

    def _one(entry: ManifestEntry) -> None:
        save_spectrogram(cache_path(cache_dir, entry), _compute(manifest, entry, settings))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(tqdm(pool.map(_one, entries), total=len(entries), desc="prep", disable=None))

    sidecar = provenance(run_config, seed)
    sidecar["dsp"] = settings.model_dump(mode="json")
    sidecar["files"] = len(entries)
    write_json(cache_dir / PREP_SIDECAR, sidecar)
    logger.info(f"Cached {len(entries)} spectrograms under {cache_dir}")
    return len(entries)


def load_spectrogram_set(
    manifest: Manifest,
    split: Optional[Split] = None,
    known: Optional[bool] = None,
    settings: Optional[DspSettings] = None,
    cache_dir: Optional[PathLike] = None,
    threads: Optional[int] = None,
) -> LabeledSet:
    """Spectrograms for the selected manifest rows, read from the cache when it matches ``settings``."""
    settings = settings or config.dsp
    cache_dir = Path(cache_dir) if cache_dir is not None else None
    entries = manifest.select(split, known)
    if not entries:
        raise DataError(f"manifest has no rows for split={split}, known={known}")
    use_cache = _cache_matches(cache_dir, settings)

    def _one(entry: ManifestEntry) -> np.ndarray:
        if use_cache:
            cached = cache_path(cache_dir, entry)
            if cached.exists():
                return load_spectrogram(cached).pixels
        return _compute(manifest, entry, settings).pixels

    workers = threads or config.runtime.worker_threads
    label = split.value if split is not None else "all"
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pixels = list(tqdm(pool.map(_one, entries), total=len(entries), desc=f"load {label}", disable=None))

    names = manifest.class_names
    y = np.array([names.index(e.synthesizer) if e.known else UNKNOWN_INDEX for e in entries], dtype=np.int64)
    return LabeledSet(
        x=np.stack(pixels).astype(np.float32),
        y=y,
        paths=[e.filepath for e in entries],
        synthesizers=[e.synthesizer for e in entries],
        known=np.array([e.known for e in entries], dtype=bool),
        class_names=names,
    )
