# config.py
"""Project-wide defaults and the validated configuration models for the CLI."""

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

# --- Encoder block defaults ---
DEFAULT_MODEL_WIDTH = 16
DEFAULT_EMA_EXPANSION = 4
DEFAULT_CHUNK = 4
DEFAULT_BLOCKS = 1
TIMESTEP_NORM_EPS = 1e-5
L2_NORM_EPS = 1e-8
CHECKPOINT_MAGIC = b"BPARS1"

# --- Optimizer defaults (Adam) ---
ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# --- Evaluation harness ---
THREADS_ENV_VAR = "BIOPARS_THREADS"
DEFAULT_MAX_THREADS = 8
AGGREGATE_ROW_ID = "__aggregate__"
AGGREGATE_DECIMALS = 2

METRIC_VERSIONS = {
    "rouge-1": "rouge-n/1.0",
    "rouge-2": "rouge-n/1.0",
    "rouge-l": "rouge-l/1.0",
    "rouge-w": "rouge-w/1.0",
    "rouge-s": "rouge-s/1.0",
    "rouge-su": "rouge-su/1.0",
    "bertscore": "bertscore/1.0",
    "moverscore": "moverscore/1.0",
    "smd": "smd/1.0",
}
EMBEDDING_METRICS = frozenset({"bertscore", "moverscore", "smd"})


class _YamlModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    @classmethod
    def from_yaml(cls, path: str | Path, **overrides):
        """
        Load the model from a YAML file, letting keyword overrides win.

        Args:
            path: YAML file containing a mapping of field names to values
            **overrides: Values taken from the command line; ``None`` values are ignored

        Returns:
            The validated configuration
        """
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.model_validate(data)


class TrainConfig(_YamlModel):
    """Toy language-model training run."""

    steps: int = Field(200, ge=1)
    d: int = Field(DEFAULT_MODEL_WIDTH, ge=1)
    h: int = Field(DEFAULT_EMA_EXPANSION, ge=1)
    z: Optional[int] = Field(None, ge=1)
    v: Optional[int] = Field(None, ge=1)
    blocks: int = Field(DEFAULT_BLOCKS, ge=1)
    chunk: int = Field(DEFAULT_CHUNK, ge=1)
    groups: Optional[int] = Field(None, ge=1)
    norm: Literal["timestep", "layer"] = "timestep"
    window: int = Field(16, ge=1)
    batch_windows: int = Field(8, ge=1)
    lr: float = Field(ADAM_LR, ge=0.0)
    beta1: float = Field(ADAM_BETA1, ge=0.0, lt=1.0)
    beta2: float = Field(ADAM_BETA2, ge=0.0, lt=1.0)
    adam_eps: float = Field(ADAM_EPS, gt=0.0)
    seed: int = 0
    log_every: int = Field(20, ge=1)


class ScoreConfig(_YamlModel):
    """Batch scoring run of the evaluation harness."""

    metrics: list[str] = Field(default_factory=lambda: ["rouge-l"])
    setting: Literal["zs", "sim", "mmr"] = "zs"
    system: str = "candidate"
    mmr_lambda: float = Field(0.5, ge=0.0, le=1.0)
    mmr_k: Optional[int] = Field(None, ge=0)
    beta: float = Field(1.0, gt=0.0)
    rouge_w_alpha: float = Field(1.2, ge=1.0)
    ngram: int = Field(1, ge=1)
    power: float = 1.0
    bertscore_layer: Optional[int] = Field(None, ge=1)
    bertscore_idf: bool = False
    moverscore_idf: bool = True
    hash_embed: bool = False
    embed_layers: int = Field(4, ge=1)
    embed_width: int = Field(16, ge=1)
    seed: int = 17

    @model_validator(mode="after")
    def _check_metrics(self):
        unknown = sorted(set(self.metrics) - set(METRIC_VERSIONS))
        if unknown:
            raise ValueError(f"Unknown metrics {unknown}. Available metrics: {sorted(METRIC_VERSIONS)}")
        if len(set(self.metrics)) != len(self.metrics):
            raise ValueError(f"Duplicate metrics in {self.metrics}")
        return self

    def config_hash(self) -> str:
        """Short SHA-256 of the canonical JSON form of this configuration."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
