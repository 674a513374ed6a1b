"""
Run configuration for SSPlanner.

A run is described by one flat ``key=value`` file. The file is parsed with
``dotenv_values`` so the process environment is never read or modified;
command-line overrides are merged on top (flags win) and the result is
validated by pydantic.
"""

import hashlib
import logging
import os
from typing import Dict, List, Literal, Mapping, Optional, Tuple

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

ExtractorName = Literal["offtheshelf", "noun", "verb", "nounverb", "attention", "random"]
KeywordSource = Literal["predicted", "ground_truth", "random"]


def derive_seed(root: int, name: str) -> int:
    """Derive an independent, reproducible stage seed from the root seed."""
    digest = hashlib.sha256(f"{root}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFFFFFFFFFFFFFF


class TrainConfig(BaseModel):
    """Optimization, objective and model-size settings"""

    model_config = ConfigDict(extra="ignore", frozen=True)

    epochs: int = Field(ge=1)
    learning_rate: float = Field(default=2e-4, gt=0)
    grad_clip_norm: float = Field(default=1.0, gt=0)
    weight_decay: float = Field(default=0.02, ge=0)
    adam_beta1: float = Field(default=0.9, gt=0, lt=1)
    adam_beta2: float = Field(default=0.999, gt=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    batch_size: int = Field(default=32, ge=1)
    lambda_plan: float = Field(default=1.0, ge=0)
    lambda_next: float = Field(default=0.5, ge=0)
    seed: int = 0

    # Plan keywords
    p: Optional[int] = Field(default=None, ge=1)
    extract_nkps: int = Field(default=5, ge=1)
    train_nkps: int = Field(default=3, ge=1)
    t_max: int = Field(default=3, ge=1)

    # Model dimensions
    d_model: int = Field(default=64, ge=1)
    d_pos: int = Field(default=16, ge=1)
    n_layers: int = Field(default=2, ge=1)
    n_heads: int = Field(default=2, ge=1)
    max_seq: int = Field(default=128, ge=8)
    max_para_len: int = Field(default=16, ge=2)
    init_range: float = Field(default=0.05, gt=0)

    # Self-supervision modules (ablation switches)
    use_sentence_positions: bool = True
    plan_prediction: bool = True
    nsp_negatives: bool = True

    show_progress: bool = True

    @model_validator(mode="after")
    def _check_heads(self) -> "TrainConfig":
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        return self

    @property
    def keywords_per_instance(self) -> int:
        """Number of plan keywords fed to the copy mechanism (p)."""
        return self.p if self.p is not None else self.train_nkps * self.t_max


class RunConfig(BaseModel):
    """Everything a CLI command may need: training settings plus paths and modes"""

    model_config = ConfigDict(extra="forbid")

    # Training fields; ``epochs`` stays optional here so that non-training
    # commands can share the file. ``to_train_config`` enforces it.
    epochs: Optional[int] = Field(default=None, ge=1)
    learning_rate: float = Field(default=2e-4, gt=0)
    grad_clip_norm: float = Field(default=1.0, gt=0)
    weight_decay: float = Field(default=0.02, ge=0)
    batch_size: int = Field(default=32, ge=1)
    lambda_plan: float = Field(default=1.0, ge=0)
    lambda_next: float = Field(default=0.5, ge=0)
    seed: int = 0
    p: Optional[int] = Field(default=None, ge=1)
    extract_nkps: int = Field(default=5, ge=1)
    train_nkps: int = Field(default=3, ge=1)
    t_max: int = Field(default=3, ge=1)
    d_model: int = Field(default=64, ge=1)
    d_pos: int = Field(default=16, ge=1)
    n_layers: int = Field(default=2, ge=1)
    n_heads: int = Field(default=2, ge=1)
    max_seq: int = Field(default=128, ge=8)
    max_para_len: int = Field(default=16, ge=2)
    use_sentence_positions: bool = True
    plan_prediction: bool = True
    nsp_negatives: bool = True
    show_progress: bool = True

    # Corpus and dataset
    corpus_paths: List[str] = Field(default_factory=list)
    dataset_dir: str = "dataset"
    min_len: int = Field(default=4, ge=2)
    max_len: int = Field(default=7, ge=2)
    single_paragraph_mode: bool = False
    max_vocab: int = Field(default=50000, gt=5)
    extractor: ExtractorName = "offtheshelf"
    attention_checkpoint: Optional[str] = None
    damping: float = Field(default=0.85, gt=0, lt=1)
    pagerank_tol: float = Field(default=1e-6, gt=0)

    # Training artifacts
    checkpoint: str = "ssplanner.ckpt"
    report: str = "train_report.json"

    # Generation
    keyword_source: KeywordSource = "predicted"
    keyword_ratio: float = Field(default=1.0, ge=0, le=1)
    decode_mode: Literal["greedy", "nucleus"] = "greedy"
    top_p: float = Field(default=0.9, gt=0, le=1)
    max_decode_len: int = Field(default=32, ge=1)
    completions: str = "completions.jsonl"

    @field_validator("corpus_paths", mode="before")
    @classmethod
    def _split_paths(cls, value):
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @model_validator(mode="after")
    def _check_bounds(self) -> "RunConfig":
        if self.max_len < self.min_len:
            raise ValueError(f"max_len={self.max_len} is smaller than min_len={self.min_len}")
        if self.max_len > self.max_para_len:
            raise ValueError(
                f"max_len={self.max_len} exceeds max_para_len={self.max_para_len}; "
                f"sentence positions would fall outside the position embedding"
            )
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        return self

    def to_train_config(self) -> TrainConfig:
        """Project onto the training settings; ``epochs`` is required here."""
        if self.epochs is None:
            raise ConfigError("missing required config key: epochs")
        fields = {name: getattr(self, name) for name in TrainConfig.model_fields if hasattr(self, name)}
        return TrainConfig(**fields)

    def dataset_file(self, split: str) -> str:
        """Path of one dataset artifact (``train``, ``valid``, ``test``, ``vocab``, ``stats``)."""
        suffix = ".json" if split in ("vocab", "stats") else ".jsonl"
        return os.path.join(self.dataset_dir, f"{split}{suffix}")


def parse_overrides(pairs: Tuple[str, ...]) -> Dict[str, str]:
    """Turn ``KEY=VALUE`` strings from the command line into a mapping."""
    overrides: Dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def load_run_config(path: Optional[str] = None, overrides: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Load a key=value config file, apply overrides and validate it."""
    values: Dict[str, Optional[str]] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        values.update(dotenv_values(path))
        logger.info(f"Loaded {len(values)} config keys from {path}")
    if overrides:
        values.update(overrides)

    missing_values = [key for key, value in values.items() if value is None]
    if missing_values:
        raise ConfigError(f"config keys without a value: {', '.join(sorted(missing_values))}")

    try:
        return RunConfig(**values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from e
