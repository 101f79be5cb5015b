"""Subcommand implementations and the end-to-end pipeline."""

from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch

from .config import (
    GenerateConfig,
    PreprocessConfig,
    PrivacyConfig,
    RunConfig,
    Stage2Config,
    TrainConfig,
    derive_seed,
)
from .ingest import CsvLayout, forward_fill_with_flags, load_csv_panel, truncate_to_multiple, write_csv_panel
from .preprocess import (
    EncodedTensor,
    TransformSet,
    decode_panel,
    discretize_panel,
    encode_panel,
    fit_transforms,
    load_encoded,
    load_transforms,
    save_encoded,
    save_transforms,
    training_schema,
)
from .schema import DatasetSchema, Panel, load_schema, measurement_companion, schema_hash
from ..gan.checkpoint import load_checkpoint
from ..gan.networks import sample_latent
from ..gan.trainer import EpochRecord, GanTrainer
from ..privacy.disclosure import RiskReport, risk_run, save_risk_report
from ..reporting.report import write_summary
from ..utils.constants import CHECKPOINT_NAME, ExitCode
from ..utils.errors import EmptyDatasetError, SchemaError
from ..utils.logging_config import logger
from ..validation.correlations import correlation_report, save_correlation_report
from ..validation.density import save_stage1, stage1_run
from ..validation.stage2 import Stage2Report, save_stage2_report, stage2_run


def stage_seed(explicit: Optional[int], global_seed: int, name: str) -> int:
    """A seed set on the stage wins; otherwise derive one from the global seed."""
    return int(explicit) if explicit is not None else derive_seed(global_seed, name)


def prepare_real_panel(schema: DatasetSchema, csv_path: str, config: PreprocessConfig) -> Panel:
    """Load the real CSV, then forward fill and truncate as configured."""
    layout = CsvLayout.for_schema(schema, config.id_column, config.time_column)
    panel = load_csv_panel(csv_path, schema, layout)
    flagged = config.forward_fill
    if flagged is None:
        flagged = [v.name for v in schema.variables
                   if not v.is_measurement_flag and measurement_companion(schema, v.name) is not None]
    if flagged:
        panel = forward_fill_with_flags(panel, flagged)
    if config.truncate_block:
        panel = truncate_to_multiple(panel, config.truncate_block)
    return panel


def run_preprocess(schema_path: str, real_csv: str, encoded_path: str, transforms_path: str,
                   config: PreprocessConfig) -> EncodedTensor:
    schema = load_schema(schema_path)
    panel = prepare_real_panel(schema, real_csv, config)
    if panel.n_patients == 0:
        raise EmptyDatasetError("real dataset", real_csv)
    transforms = fit_transforms(panel)
    encoded = encode_panel(panel, transforms)
    save_transforms(transforms_path, TransformSet(schema, transforms))
    save_encoded(encoded_path, encoded)
    return encoded


def run_ingest(schema_path: str, input_csv: str, output_csv: str, config: PreprocessConfig) -> Panel:
    """Forward fill and truncate a raw CSV and write the cleaned panel in the same layout."""
    schema = load_schema(schema_path)
    panel = prepare_real_panel(schema, input_csv, config)
    write_csv_panel(panel, CsvLayout.for_schema(schema, config.id_column, config.time_column), output_csv)
    logger.info(f"Ingested {panel.n_patients} patient(s) into {output_csv}")
    return panel


def run_train(encoded_path: str, config: TrainConfig, out_dir: str,
              callbacks: Optional[List] = None, schema_path: Optional[str] = None) -> List[EpochRecord]:
    encoded = load_encoded(encoded_path)
    if schema_path:
        expected = training_schema(load_schema(schema_path))
        if schema_hash(expected) != schema_hash(encoded.schema):
            raise SchemaError([f"encoded tensor {encoded_path} was not built from schema {schema_path}"])
    trainer = GanTrainer(encoded.schema, config)
    for callback in callbacks or []:
        trainer.add_epoch_callback(callback)
    _, _, records = trainer.train(encoded, out_dir)
    return records


def generate_panel(checkpoint_path: str, transform_set: TransformSet, count: int, seed: int,
                   batch_size: int = 256) -> Panel:
    """Draw `count` full-length synthetic patients and decode them to clinical units."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    path = Path(checkpoint_path)
    if path.is_dir():
        path = path / CHECKPOINT_NAME
    schema, gen_net, _, _ = load_checkpoint(str(path), expected_hash=transform_set.schema_hash)
    T = schema.sequence_length
    rng = torch.Generator().manual_seed(seed)
    chunks = []
    gen_net.eval()
    with torch.no_grad():
        for start in range(0, count, batch_size):
            size = min(batch_size, count - start)
            latent = sample_latent(size, T, schema.latent_dim, generator=rng)
            chunks.append(gen_net(latent.z).numpy())
    data = np.concatenate(chunks) if chunks else np.zeros((0, T, schema.encoded_width))
    width = len(str(count)) if count else 1
    tensor = EncodedTensor(
        schema=schema,
        data=data,
        lengths=np.full(count, T, dtype=np.int64),
        patient_ids=tuple(str(i + 1).zfill(width) for i in range(count)),
    )
    return decode_panel(tensor, transform_set.transforms)


def run_generate(checkpoint_path: str, transforms_path: str, count: int, seed: int, out_csv: str,
                 config: GenerateConfig, preprocess: PreprocessConfig) -> Panel:
    transform_set = load_transforms(transforms_path)
    panel = generate_panel(checkpoint_path, transform_set, count, seed, config.batch_size)
    layout = CsvLayout.for_schema(panel.schema, preprocess.id_column, preprocess.time_column)
    write_csv_panel(panel, layout, out_csv)
    return panel


def load_comparison_panels(schema_path: str, real_csv: str, syn_csv: str, preprocess: PreprocessConfig,
                           transforms_path: Optional[str] = None):
    """Real panel on the fitted schema plus the synthetic panel read against it."""
    schema = load_schema(schema_path)
    real = prepare_real_panel(schema, real_csv, preprocess)
    if transforms_path and Path(transforms_path).exists():
        transforms = load_transforms(transforms_path).transforms
    else:
        transforms = fit_transforms(real)
    real = discretize_panel(real, transforms)
    layout = CsvLayout.for_schema(real.schema, preprocess.id_column, preprocess.time_column)
    syn = load_csv_panel(syn_csv, real.schema, layout)
    return real, syn, transforms


def run_validate(schema_path: str, real_csv: str, syn_csv: str, out_dir: str, config: Stage2Config,
                 preprocess: PreprocessConfig, transforms_path: Optional[str] = None) -> Stage2Report:
    """Stages one to three; writes every table under `out_dir`."""
    real, syn, _ = load_comparison_panels(schema_path, real_csv, syn_csv, preprocess, transforms_path)
    if real.n_patients == 0 or syn.n_patients == 0:
        raise EmptyDatasetError("dataset", "validation needs real and synthetic patients")

    save_stage1(out_dir, stage1_run(real, syn), real, syn)
    report = stage2_run(real, syn, config)
    save_stage2_report(str(Path(out_dir) / 'stage2.json'), report)
    save_correlation_report(out_dir, correlation_report(real, syn))
    return report


def run_risk(schema_path: str, real_csv: str, syn_csv: str, out_path: str, config: PrivacyConfig,
             preprocess: PreprocessConfig, transforms_path: Optional[str] = None) -> RiskReport:
    real, syn, transforms = load_comparison_panels(schema_path, real_csv, syn_csv, preprocess, transforms_path)
    population = None
    if config.population_csv:
        declared = load_schema(schema_path)
        population = discretize_panel(prepare_real_panel(declared, config.population_csv, preprocess), transforms)
    report = risk_run(real, syn, config, population)
    save_risk_report(out_path, report)
    return report


class SynthGymPipeline:
    """preprocess -> train -> generate -> validate -> risk -> report for one RunConfig."""

    def __init__(self, config: RunConfig, seed: int):
        self.config = config
        self.seed = seed
        self.results: Dict[str, object] = {}
        self.config.train.seed = stage_seed(config.train.seed, seed, 'train')
        self.config.stage2.seed = stage_seed(config.stage2.seed, seed, 'validate')
        logger.info(f"Pipeline initialized in {config.work_dir} with seed {seed}")

    def run(self) -> ExitCode:
        cfg = self.config
        encoded = run_preprocess(cfg.schema, cfg.real_csv, str(cfg.encoded_path), str(cfg.transforms_path),
                                 cfg.preprocess)
        run_train(str(cfg.encoded_path), cfg.train, str(cfg.checkpoint_dir), schema_path=str(cfg.schema))

        count = cfg.generate.count if cfg.generate.count is not None else encoded.n_patients
        run_generate(str(cfg.checkpoint_path), str(cfg.transforms_path), count,
                     stage_seed(cfg.generate.seed, self.seed, 'generate'), str(cfg.synthetic_csv),
                     cfg.generate, cfg.preprocess)

        stage2 = run_validate(cfg.schema, cfg.real_csv, str(cfg.synthetic_csv), str(cfg.validate_dir),
                              cfg.stage2, cfg.preprocess, str(cfg.transforms_path))
        risk = run_risk(cfg.schema, cfg.real_csv, str(cfg.synthetic_csv), str(cfg.risk_path), cfg.privacy,
                        cfg.preprocess, str(cfg.transforms_path))
        write_summary(str(cfg.validate_dir), str(cfg.risk_path), str(cfg.summary_path))
        self.results = {'stage2': stage2, 'risk': risk}

        if not stage2.realistic:
            logger.warning(f"Variables failing validation: {stage2.failed}")
            return ExitCode.VALIDATION_FAILED
        if not risk.passed:
            return ExitCode.RISK_EXCEEDED
        return ExitCode.SUCCESS
