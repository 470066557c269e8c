"""Dataset manifests: CSV with columns filepath,synthesizer,split,known."""

from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from pydantic import BaseModel, Field, model_validator

from app.artifacts import write_csv
from app.exceptions import LabelError, ManifestError
from app.schema import Split

MANIFEST_COLUMNS = ["filepath", "synthesizer", "split", "known"]
_TRUE = {"true", "1", "yes", "y", "t"}
_FALSE = {"false", "0", "no", "n", "f"}

PathLike = Union[str, Path]


class ManifestEntry(BaseModel):
    filepath: str
    synthesizer: str = Field(..., min_length=1)
    split: Split
    known: bool


class Manifest(BaseModel):
    """Validated rows plus the directory relative paths are resolved against."""

    entries: List[ManifestEntry] = Field(default_factory=list)
    root: Path = Field(default_factory=Path.cwd)

    @model_validator(mode="after")
    def _check_invariants(self) -> "Manifest":
        seen: Dict[str, int] = {}
        status: Dict[str, bool] = {}
        for row, entry in enumerate(self.entries, start=1):
            if entry.filepath in seen:
                raise ManifestError(
                    f"duplicate filepath {entry.filepath!r} (rows {seen[entry.filepath]} and {row})"
                )
            seen[entry.filepath] = row
            if entry.split == Split.TRAIN and not entry.known:
                raise ManifestError(
                    f"row {row}: unknown synthesizer {entry.synthesizer!r} in the train split ({entry.filepath})"
                )
            previous = status.setdefault(entry.synthesizer, entry.known)
            if previous != entry.known:
                raise ManifestError(f"synthesizer {entry.synthesizer!r} is marked both known and unknown")
        return self

    @property
    def class_names(self) -> List[str]:
        """Known synthesizers in first-appearance order; position = class index."""
        names: List[str] = []
        for entry in self.entries:
            if entry.known and entry.synthesizer not in names:
                names.append(entry.synthesizer)
        return names

    @property
    def unknown_names(self) -> List[str]:
        names: List[str] = []
        for entry in self.entries:
            if not entry.known and entry.synthesizer not in names:
                names.append(entry.synthesizer)
        return names

    def class_index(self, synthesizer: str) -> int:
        try:
            return self.class_names.index(synthesizer)
        except ValueError:
            raise LabelError(f"{synthesizer!r} is not a known synthesizer") from None

    def select(self, split: Optional[Split] = None, known: Optional[bool] = None) -> List[ManifestEntry]:
        return [
            e
            for e in self.entries
            if (split is None or e.split == split) and (known is None or e.known == known)
        ]

    def resolve(self, entry: ManifestEntry) -> Path:
        path = Path(entry.filepath)
        return path if path.is_absolute() else self.root / path

    def __len__(self) -> int:
        return len(self.entries)


def _parse_known(value, row: int) -> bool:
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ManifestError(f"row {row}: known must be true/false, got {value!r}")


def load_manifest(path: PathLike) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    try:
        frame = pd.read_csv(path, comment="#", dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ManifestError(f"{path}: unreadable manifest ({e})") from e

    missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
    if missing:
        raise ManifestError(f"{path}: missing columns {missing}")

    entries = []
    for row, record in enumerate(frame[MANIFEST_COLUMNS].itertuples(index=False), start=1):
        split = str(record.split).strip().lower()
        if split not in (Split.TRAIN.value, Split.TEST.value):
            raise ManifestError(f"row {row}: split must be train or test, got {record.split!r}")
        if not str(record.filepath).strip() or not str(record.synthesizer).strip():
            raise ManifestError(f"row {row}: empty filepath or synthesizer")
        entries.append(
            ManifestEntry(
                filepath=str(record.filepath).strip(),
                synthesizer=str(record.synthesizer).strip(),
                split=Split(split),
                known=_parse_known(record.known, row),
            )
        )
    return Manifest(entries=entries, root=path.parent)


def write_manifest(path: PathLike, manifest: Manifest, stamp: Optional[dict] = None) -> Path:
    frame = pd.DataFrame(
        [
            {
                "filepath": e.filepath,
                "synthesizer": e.synthesizer,
                "split": e.split.value,
                "known": "true" if e.known else "false",
            }
            for e in manifest.entries
        ],
        columns=MANIFEST_COLUMNS,
    )
    return write_csv(path, frame, stamp or {})
