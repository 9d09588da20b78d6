"""
Pipeline configuration: one TOML file parsed into pydantic models, with
dotted `key=value` overrides from the command line and secrets from .env.
"""

from __future__ import annotations

import hashlib
import json
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from modules.neural_core import ModelConfig
from modules.schema import ConfigError
from modules.synth_corpus import SynthConfig
from modules.teacher import NoiseConfig, PromptMode

# Load environment variables
load_dotenv()


class PathsConfig(BaseModel):
    lexicon: str = "data/sample_lexicon.tsv"
    corpus: str = "data/sample_abstracts.jsonl"
    sentences: Optional[str] = None
    gold: Optional[str] = None
    annotations: Optional[str] = None
    student: Optional[str] = None
    cache: str = "cache/teacher"
    out: str = "out"


class TrainingConfig(BaseModel):
    epochs: int = Field(10, gt=0)
    batch_size: int = Field(32, gt=0)
    lr: float = Field(1e-3, ge=0.0)
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    min_count: int = Field(1, gt=0)


class TeacherConfig(BaseModel):
    kind: Literal["mock", "real"] = "mock"
    mode: PromptMode = PromptMode.FEW_SHOT_5
    endpoint: Optional[str] = None
    model: Optional[str] = None
    max_parallel: int = Field(4, gt=0)
    max_retries: int = Field(3, ge=0)
    backoff_base: float = Field(0.5, ge=0.0)
    # explicit noise wins over the per-mode defaults
    noise: Optional[NoiseConfig] = None
    noise_zero: NoiseConfig = NoiseConfig(drop_rate=0.2, spurious_rate=0.1, jitter_rate=0.2)
    noise_few: NoiseConfig = NoiseConfig(drop_rate=0.1, spurious_rate=0.05, jitter_rate=0.1)

    def noise_for(self, mode: PromptMode) -> NoiseConfig:
        if self.noise is not None:
            return self.noise
        return self.noise_zero if PromptMode(mode) is PromptMode.ZERO_SHOT else self.noise_few


class EvalConfig(BaseModel):
    k: int = Field(10, ge=2)
    curve_sizes: List[int] = [100, 500, 2000]
    curve_seeds: List[int] = [1, 2, 3]
    bench_sizes: List[Annotated[int, Field(gt=0)]] = Field([1, 2, 4, 8, 16], min_length=1)
    bench_repeats: int = Field(3, gt=0)


class PipelineConfig(BaseModel):
    paths: PathsConfig = PathsConfig()
    model: ModelConfig = ModelConfig()
    training: TrainingConfig = TrainingConfig()
    teacher: TeacherConfig = TeacherConfig()
    synth: SynthConfig = SynthConfig()
    evaluation: EvalConfig = EvalConfig()
    distill_pool_size: int = Field(40000, gt=0)
    max_workers: int = Field(4, gt=0)
    seed: int = 0


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply dotted `section.key=value` overrides to a raw config dict.
    Values are read as JSON when possible ("3", "0.5", "[1,2]", "true"),
    otherwise kept as strings.
    """
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {item!r} is not of the form key=value")
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"override {item!r}: {part!r} is not a section")
            node = child
        node[parts[-1]] = _parse_value(raw.strip())
    return data


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> PipelineConfig:
    """
    Load a PipelineConfig from TOML (defaults when path is None) and apply
    overrides.

    Raises:
        ConfigError: unreadable file or invalid values
    """
    data: Dict[str, Any] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    apply_overrides(data, overrides)
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def config_hash(config: PipelineConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
