"""Pipeline configuration: one key = value file plus overrides.

All phases read the same PipelineConfig; artifact locations derive from
work_dir so every phase can restart from its persisted predecessors.
"""

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .classify import StreamingGaussianNB, WarmStartForestClassifier
from .embedding import EmbeddingConfig


@dataclass
class PipelineConfig:
    n: int = 2
    vocab_size: int = 65536
    batch_size: int = 128
    skip_window: int = 1
    num_skips: int = 2
    embedding_size: int = 128
    num_negative: int = 64
    num_steps: int = 100_000
    learning_rate: float = 1.0
    seed: int = 1
    workers: int = 1
    classifier: str = "rf"          # rf | gnb
    n_estimators_per_file: int = 10
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    var_floor_scale: float = 1e-9
    work_dir: Path = Path("work")

    def __post_init__(self):
        self.work_dir = Path(self.work_dir)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.classifier not in ("rf", "gnb"):
            raise ValueError(f"classifier must be rf or gnb, "
                             f"got {self.classifier!r}")
        self.embedding_config()  # validates the embedding hyperparameters

    def embedding_config(self) -> EmbeddingConfig:
        return EmbeddingConfig(
            batch_size=self.batch_size, skip_window=self.skip_window,
            num_skips=self.num_skips, embedding_size=self.embedding_size,
            num_negative=self.num_negative, num_steps=self.num_steps,
            learning_rate=self.learning_rate, seed=self.seed)

    def make_classifier(self):
        if self.classifier == "rf":
            return WarmStartForestClassifier(
                n_estimators_per_file=self.n_estimators_per_file,
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                random_state=self.seed)
        return StreamingGaussianNB(var_floor_scale=self.var_floor_scale)

    # Artifact locations
    @property
    def vocab_path(self) -> Path:
        return self.work_dir / "vocab.dict"

    @property
    def embeddings_path(self) -> Path:
        return self.work_dir / "embeddings.bin"

    @property
    def model_path(self) -> Path:
        return self.work_dir / f"model_{self.classifier}.bin"

    @property
    def tokens_dir(self) -> Path:
        return self.work_dir / "tokens"

    @property
    def features_dir(self) -> Path:
        return self.work_dir / "features"

    @property
    def labels_dir(self) -> Path:
        return self.work_dir / "labels"

    @property
    def scores_dir(self) -> Path:
        return self.work_dir / "scores"

    @property
    def eval_dir(self) -> Path:
        return self.work_dir / "eval"

    def flat_path(self, capture_path) -> Path:
        return self.tokens_dir / f"{Path(capture_path).stem}.flat"

    def packets_path(self, capture_path) -> Path:
        return self.tokens_dir / f"{Path(capture_path).stem}.pkt"

    def features_path(self, capture_path) -> Path:
        return self.features_dir / f"{Path(capture_path).stem}.feat"

    def labels_path(self, capture_path) -> Path:
        return self.labels_dir / f"{Path(capture_path).stem}.labels"

    def scores_path(self, capture_path) -> Path:
        return self.scores_dir / f"{Path(capture_path).stem}.scores"


_FIELD_TYPES = {f.name: f for f in fields(PipelineConfig)}


def _coerce(key: str, text: str):
    text = text.strip()
    if key == "work_dir":
        return Path(text)
    if key == "classifier":
        return text
    if key == "max_depth":
        return None if text in ("", "none", "None") else int(text)
    if key in ("learning_rate", "var_floor_scale"):
        return float(text)
    return int(text)


def parse_config_text(text: str) -> dict:
    """Parse key = value lines ('#' starts a comment, blanks ignored)."""
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {line_no}: expected key = value, "
                             f"got {line.rstrip()!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {line_no}: unknown config key {key!r}")
        values[key] = _coerce(key, value)
    return values


def load_config(path=None, overrides=None) -> PipelineConfig:
    """Build a PipelineConfig from an optional file plus key=value
    overrides."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    for item in overrides or ():
        if "=" not in item:
            raise ValueError(f"override must be key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value)
    return PipelineConfig(**values)
