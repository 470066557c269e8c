import os
import threading
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from loguru import logger
from pydantic import BaseModel, Field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


def get_project_root() -> Path:
    """Get the project root directory"""
    return Path(__file__).resolve().parent.parent


PROJECT_ROOT = get_project_root()

THREADS_ENV = "CATKIT_THREADS"


class RuntimeSettings(BaseModel):
    threads: Optional[int] = Field(
        None, ge=1, description="Worker thread cap (None = os.cpu_count())"
    )
    seed: int = Field(0, description="Default run seed")
    log_level: str = Field("INFO", description="stderr log level")
    log_dir: Optional[str] = Field(
        None, description="Directory for log files, relative to the project root"
    )

    @property
    def worker_threads(self) -> int:
        return self.threads or os.cpu_count() or 1


class DspSettings(BaseModel):
    """Spectrogram front-end"""

    sample_rate: int = Field(16000, description="Required input sampling rate")
    win_len: int = Field(512, ge=2, description="Analysis window (samples)")
    hop: int = Field(128, ge=1, description="Frame shift (samples), 8 ms")
    fft_len: int = Field(512, ge=2, description="FFT size")
    freq_crop: Literal["low", "high", "center"] = Field(
        "low", description="Which 128 of the one-sided bins survive"
    )


class EvalSettings(BaseModel):
    threshold: float = Field(0.5, gt=0.0, lt=1.0, description="Open-set threshold T")
    known_recall_target: float = Field(
        0.95, gt=0.0, le=1.0, description="Known-class retention for calibrated T"
    )


class EmbedSettings(BaseModel):
    perplexity: float = Field(50.0, gt=0.0)
    iterations: int = Field(1500, ge=1)
    learning_rate: float = Field(200.0, gt=0.0)
    max_points: int = Field(2000, ge=5, description="Stratified subsample cap")


class AppConfig(BaseModel):
    runtime: RuntimeSettings = Field(default_factory=RuntimeSettings)
    dsp: DspSettings = Field(default_factory=DspSettings)
    eval: EvalSettings = Field(default_factory=EvalSettings)
    embed: EmbedSettings = Field(default_factory=EmbedSettings)
    train: Dict[str, Dict[str, Any]] = Field(
        default_factory=dict, description="Per-architecture training overrides"
    )


class Config:
    _instance = None
    _lock = threading.Lock()
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._initialized:
            with self._lock:
                if not self._initialized:
                    self._config = None
                    self._load_initial_config()
                    self._initialized = True

    @staticmethod
    def _get_config_path() -> Path:
        root = PROJECT_ROOT
        config_path = root / "config" / "config.toml"
        if config_path.exists():
            return config_path
        example_path = root / "config" / "config.toml.example"
        if example_path.exists():
            return example_path
        return config_path

    def _load_config(self) -> dict:
        config_path = self._get_config_path()
        if not config_path.exists():
            return {}
        try:
            with config_path.open("rb") as f:
                return tomllib.load(f)
        except (OSError, tomllib.TOMLDecodeError) as e:
            logger.warning(f"Failed to load config file {config_path}, using defaults: {e}")
            return {}

    def _load_initial_config(self):
        raw_config = self._load_config()

        runtime = dict(raw_config.get("runtime", {}))
        env_threads = os.getenv(THREADS_ENV, "")
        if env_threads.strip():
            try:
                runtime["threads"] = max(1, int(env_threads))
            except ValueError:
                logger.warning(f"Ignoring non-integer {THREADS_ENV}={env_threads!r}")

        self._config = AppConfig(
            runtime=RuntimeSettings(**runtime),
            dsp=DspSettings(**raw_config.get("dsp", {})),
            eval=EvalSettings(**raw_config.get("eval", {})),
            embed=EmbedSettings(**raw_config.get("embed", {})),
            train=raw_config.get("train", {}),
        )

    def reload(self):
        """Re-read the TOML file and environment."""
        with self._lock:
            self._initialized = False
            self._load_initial_config()
            self._initialized = True

    @property
    def runtime(self) -> RuntimeSettings:
        return self._config.runtime

    @property
    def dsp(self) -> DspSettings:
        return self._config.dsp

    @property
    def eval(self) -> EvalSettings:
        return self._config.eval

    @property
    def embed(self) -> EmbedSettings:
        return self._config.embed

    def train_overrides(self, arch: str) -> Dict[str, Any]:
        return dict(self._config.train.get(arch, {}))


config = Config()
