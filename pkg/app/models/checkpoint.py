"""Checkpoint files.

Layout: b"CATCKPT1", header length as little-endian u32, UTF-8 JSON header,
then the parameter blobs as little-endian float32. The header names the
architecture, its config, and every tensor with its shape, byte offset
(relative to the first blob) and byte length.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from app.exceptions import CheckpointError, ConfigError
from app.logger import logger
from app.models.base import BaseClassifier
from app.models.registry import build_model, model_config_for
from app.schema import ArchKind

CKPT_MAGIC = b"CATCKPT1"
_HEADER_LEN = struct.Struct("<I")

PathLike = Union[str, Path]


class TensorEntry(BaseModel):
    name: str
    shape: List[int]
    offset: int = Field(..., ge=0)
    nbytes: int = Field(..., ge=0)


class CheckpointMeta(BaseModel):
    """Run context stored with the weights."""

    class_names: List[str] = Field(default_factory=list)
    seed: int = 0
    threshold: Optional[float] = Field(None, description="Calibrated open-set threshold T")
    best_epoch: Optional[int] = None
    val_loss: Optional[float] = None
    run_config: Dict[str, Any] = Field(default_factory=dict)


class CheckpointHeader(BaseModel):
    arch: ArchKind
    config: Dict[str, Any]
    tensors: List[TensorEntry]
    meta: CheckpointMeta = Field(default_factory=CheckpointMeta)


def encode_checkpoint(model: BaseClassifier, meta: Optional[CheckpointMeta] = None) -> bytes:
    entries: List[TensorEntry] = []
    blobs: List[bytes] = []
    offset = 0
    for name, tensor in model.params.items():
        blob = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
        entries.append(TensorEntry(name=name, shape=list(tensor.shape), offset=offset, nbytes=len(blob)))
        blobs.append(blob)
        offset += len(blob)
    header = CheckpointHeader(
        arch=model.arch,
        config=model.cfg.model_dump(mode="json"),
        tensors=entries,
        meta=meta or CheckpointMeta(),
    )
    header_bytes = header.model_dump_json().encode("utf-8")
    return CKPT_MAGIC + _HEADER_LEN.pack(len(header_bytes)) + header_bytes + b"".join(blobs)


def decode_checkpoint(blob: bytes, source: str = "<bytes>") -> Tuple[BaseClassifier, CheckpointMeta]:
    head = len(CKPT_MAGIC) + _HEADER_LEN.size
    if len(blob) < head or blob[: len(CKPT_MAGIC)] != CKPT_MAGIC:
        raise CheckpointError(f"{source}: not a CATCKPT1 checkpoint")
    (header_len,) = _HEADER_LEN.unpack_from(blob, len(CKPT_MAGIC))
    if len(blob) < head + header_len:
        raise CheckpointError(f"{source}: truncated header")
    try:
        header = CheckpointHeader.model_validate_json(blob[head : head + header_len])
    except ValidationError as e:
        raise CheckpointError(f"{source}: malformed header ({e.error_count()} errors)") from e

    data_start = head + header_len
    state: Dict[str, np.ndarray] = {}
    for entry in header.tensors:
        expected = 4 * int(np.prod(entry.shape, dtype=np.int64))
        start = data_start + entry.offset
        if entry.nbytes != expected or start + entry.nbytes > len(blob):
            raise CheckpointError(f"{source}: tensor {entry.name} is truncated or mis-sized")
        state[entry.name] = np.frombuffer(blob, dtype="<f4", count=expected // 4, offset=start).reshape(
            entry.shape
        )

    try:
        cfg = model_config_for(header.arch, header.config)
    except ConfigError as e:
        raise CheckpointError(f"{source}: {e.message}") from e
    model = build_model(header.arch, cfg)
    model.load_state_dict(state)
    return model, header.meta


def save_checkpoint(path: PathLike, model: BaseClassifier, meta: Optional[CheckpointMeta] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(model, meta))
    logger.info(f"Saved {model.arch.value} checkpoint ({model.param_count()} params) to {path}")
    return path


def load_checkpoint(path: PathLike) -> Tuple[BaseClassifier, CheckpointMeta]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes(), str(path))
