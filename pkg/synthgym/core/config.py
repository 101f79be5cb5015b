"""Run configuration: YAML file into dataclasses, plus seed derivation."""

import hashlib
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from ..utils.constants import (
    CHECKPOINT_NAME,
    CURRICULUM_FRACTIONS,
    DEFAULT_ADAM_BETA1,
    DEFAULT_ADAM_BETA2,
    DEFAULT_ALPHA,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CHECKPOINT_EVERY,
    DEFAULT_CRITIC_STEPS,
    DEFAULT_EPOCHS,
    DEFAULT_ITERATIONS,
    DEFAULT_LAMBDA_CORR,
    DEFAULT_LAMBDA_GP,
    DEFAULT_LEARNING_RATE,
    DEFAULT_PASS_FRACTION,
    DEFAULT_RISK_THRESHOLD,
    DEFAULT_SAMPLE_SIZE,
    DEFAULT_SIGMA_MULTIPLIER,
    DEFAULT_THREE_SIGMA_COVERAGE,
    ENCODED_SUFFIX,
    GradientPenaltyPoint,
    TRANSFORMS_SUFFIX,
)
from ..utils.errors import SynthGymError
from ..utils.logging_config import logger

SEED_ENV_VAR = 'SYNTHGYM_SEED'


class ConfigError(SynthGymError, ValueError):
    """A run configuration value is missing or out of range."""


def derive_seed(seed: int, name: str) -> int:
    """Per-subcommand seed: first 8 bytes of sha256("{seed}:{name}") modulo 2**31."""
    digest = hashlib.sha256(f"{seed}:{name}".encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big') % (2 ** 31)


def default_curriculum(sequence_length: int, epochs: int) -> List[Tuple[int, int]]:
    """Lengths ceil(T/4), ceil(T/2), T over 20%, 20% and 60% of the epochs."""
    lengths = [math.ceil(sequence_length / 4), math.ceil(sequence_length / 2), sequence_length]
    spans = [int(round(fraction * epochs)) for fraction in CURRICULUM_FRACTIONS[:-1]]
    spans.append(epochs - sum(spans))
    return [(length, span) for length, span in zip(lengths, spans) if span > 0]


def _from_mapping(cls, data: Optional[Dict[str, Any]]):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} key(s): {unknown}")
    return cls(**data)


@dataclass
class TrainConfig:
    """Hyper-parameters of GAN training."""
    lambda_gp: float = DEFAULT_LAMBDA_GP
    lambda_corr: float = DEFAULT_LAMBDA_CORR
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    adam_beta1: float = DEFAULT_ADAM_BETA1
    adam_beta2: float = DEFAULT_ADAM_BETA2
    critic_steps_per_gen: int = DEFAULT_CRITIC_STEPS
    epochs: int = DEFAULT_EPOCHS
    curriculum: Optional[List[Tuple[int, int]]] = None
    seed: Optional[int] = None
    gp_at: GradientPenaltyPoint = GradientPenaltyPoint.INTERPOLATES
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY

    def __post_init__(self):
        self.gp_at = GradientPenaltyPoint(self.gp_at)
        if self.curriculum is not None:
            self.curriculum = [(int(length), int(span)) for length, span in self.curriculum]

    def resolved_curriculum(self, sequence_length: int) -> List[Tuple[int, int]]:
        """Check every setting and return the (length, epochs) stages to run."""
        positive = {
            'lambda_gp': self.lambda_gp >= 0, 'lambda_corr': self.lambda_corr >= 0,
            'batch_size': self.batch_size > 0, 'learning_rate': self.learning_rate > 0,
            'critic_steps_per_gen': self.critic_steps_per_gen > 0, 'epochs': self.epochs > 0,
            'checkpoint_every': self.checkpoint_every > 0,
        }
        bad = [name for name, ok in positive.items() if not ok]
        if bad:
            raise ConfigError(f"training settings out of range: {bad}")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ConfigError("Adam betas must lie in [0, 1)")

        stages = self.curriculum or default_curriculum(sequence_length, self.epochs)
        lengths = [length for length, _ in stages]
        if any(span <= 0 for _, span in stages) or any(length < 1 for length in lengths):
            raise ConfigError(f"curriculum stages must have positive lengths and spans: {stages}")
        if any(b < a for a, b in zip(lengths, lengths[1:])):
            raise ConfigError(f"curriculum lengths must be non-decreasing: {lengths}")
        if lengths[-1] != sequence_length:
            raise ConfigError(f"curriculum must end at sequence length {sequence_length}, got {lengths[-1]}")
        if sum(span for _, span in stages) != self.epochs:
            raise ConfigError(f"curriculum spans must add up to {self.epochs} epochs")
        return stages

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['gp_at'] = self.gp_at.value
        return data


@dataclass
class Stage2Config:
    """Settings of the iterative statistical test battery."""
    iterations: int = DEFAULT_ITERATIONS
    sample_size: int = DEFAULT_SAMPLE_SIZE
    alpha_ks: float = DEFAULT_ALPHA
    alpha_t: float = DEFAULT_ALPHA
    alpha_f: float = DEFAULT_ALPHA
    pass_fraction: float = DEFAULT_PASS_FRACTION
    three_sigma_coverage: float = DEFAULT_THREE_SIGMA_COVERAGE
    sigma_multiplier: float = DEFAULT_SIGMA_MULTIPLIER
    minmax: bool = True
    seed: Optional[int] = None

    def __post_init__(self):
        problems = []
        if self.iterations < 1:
            problems.append('iterations must be >= 1')
        if self.sample_size < 2:
            problems.append('sample_size must be >= 2')
        for name in ('alpha_ks', 'alpha_t', 'alpha_f'):
            if not 0.0 < getattr(self, name) < 1.0:
                problems.append(f'{name} must lie in (0, 1)')
        for name in ('pass_fraction', 'three_sigma_coverage'):
            if not 0.0 < getattr(self, name) <= 1.0:
                problems.append(f'{name} must lie in (0, 1]')
        if self.sigma_multiplier <= 0:
            problems.append('sigma_multiplier must be positive')
        if problems:
            raise ConfigError("; ".join(problems))


@dataclass
class PrivacyConfig:
    """Quasi-identifiers and the acceptable risk.

    An empty `qids` falls back to the variables the schema flags as
    quasi-identifiers; with none flagged every record shares one class.
    """
    qids: str = ''
    threshold: float = DEFAULT_RISK_THRESHOLD
    population_csv: Optional[str] = None
    prefilter: bool = True

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"risk threshold must lie in (0, 1], got {self.threshold}")


@dataclass
class PreprocessConfig:
    """How the real CSV is read and cleaned before encoding."""
    id_column: str = 'id'
    time_column: str = 'time'
    forward_fill: Optional[List[str]] = None
    truncate_block: Optional[int] = None


@dataclass
class GenerateConfig:
    """Synthetic sample size; a missing count means as many patients as the real data."""
    count: Optional[int] = None
    batch_size: int = 256
    seed: Optional[int] = None


@dataclass
class RunConfig:
    """One pipeline run: inputs, the working directory, and every stage's settings."""
    schema: str
    real_csv: str
    work_dir: str = 'run'
    seed: Optional[int] = None
    train: TrainConfig = field(default_factory=TrainConfig)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    privacy: PrivacyConfig = field(default_factory=PrivacyConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    generate: GenerateConfig = field(default_factory=GenerateConfig)

    @property
    def base(self) -> Path:
        return Path(self.work_dir)

    @property
    def encoded_path(self) -> Path:
        return self.base / f"real{ENCODED_SUFFIX}"

    @property
    def transforms_path(self) -> Path:
        return self.base / f"real{TRANSFORMS_SUFFIX}"

    @property
    def checkpoint_dir(self) -> Path:
        return self.base / 'ckpt'

    @property
    def checkpoint_path(self) -> Path:
        return self.checkpoint_dir / CHECKPOINT_NAME

    @property
    def synthetic_csv(self) -> Path:
        return self.base / 'synthetic.csv'

    @property
    def validate_dir(self) -> Path:
        return self.base / 'report'

    @property
    def risk_path(self) -> Path:
        return self.base / 'report' / 'risk.json'

    @property
    def summary_path(self) -> Path:
        return self.base / 'report' / 'summary.md'

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[Path] = None) -> 'RunConfig':
        data = dict(data or {})
        for required in ('schema', 'real_csv'):
            if required not in data:
                raise ConfigError(f"run config is missing '{required}'")
        sections = {
            'train': TrainConfig, 'stage2': Stage2Config, 'privacy': PrivacyConfig,
            'preprocess': PreprocessConfig, 'generate': GenerateConfig,
        }
        for key, section_cls in sections.items():
            data[key] = _from_mapping(section_cls, data.get(key))
        if base_dir is not None:
            for key in ('schema', 'real_csv', 'work_dir'):
                if key in data and not Path(data[key]).is_absolute():
                    data[key] = str(base_dir / data[key])
            population = data['privacy'].population_csv
            if population and not Path(population).is_absolute():
                data['privacy'].population_csv = str(base_dir / population)
        return _from_mapping(cls, data)


def load_run_config(path: str) -> RunConfig:
    """Read a YAML run config; relative paths resolve against the file's directory."""
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f)
    config = RunConfig.from_dict(data, base_dir=Path(path).resolve().parent)
    logger.info(f"Run config loaded from {path}")
    return config


def resolve_seed(cli_seed: Optional[int] = None, config_seed: Optional[int] = None) -> int:
    """--seed wins over the config file, which wins over SYNTHGYM_SEED; 0 otherwise."""
    if cli_seed is not None:
        return int(cli_seed)
    if config_seed is not None:
        return int(config_seed)
    env_seed = os.getenv(SEED_ENV_VAR)
    if env_seed:
        try:
            return int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got '{env_seed}'") from None
    logger.warning(f"No seed given; using 0 (set --seed or {SEED_ENV_VAR})")
    return 0
