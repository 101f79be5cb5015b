"""Main entry point for synthgym."""

import argparse
import sys
from dataclasses import replace
from typing import List, Optional

from dotenv import load_dotenv

from synthgym.core.config import (
    ConfigError,
    GenerateConfig,
    PreprocessConfig,
    PrivacyConfig,
    RunConfig,
    Stage2Config,
    TrainConfig,
    load_run_config,
    resolve_seed,
)
from synthgym.core.pipeline import (
    SynthGymPipeline,
    run_generate,
    run_ingest,
    run_preprocess,
    run_risk,
    run_train,
    run_validate,
    stage_seed,
)
from synthgym.core.preprocess import load_encoded
from synthgym.reporting.report import write_summary
from synthgym.utils.constants import ExitCode, GradientPenaltyPoint
from synthgym.utils.errors import SynthGymError
from synthgym.utils.logging_config import logger, set_verbose, setup_logging


def _add_layout_args(p: argparse.ArgumentParser):
    p.add_argument('--id-col', help='patient id column (default: id)')
    p.add_argument('--time-col', help='timestep column (default: time)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='synthgym',
                                     description='Train, sample and validate synthetic clinical time series.')
    parser.add_argument('--config', help='YAML run config')
    parser.add_argument('--seed', type=int, help='global seed (overrides the config and SYNTHGYM_SEED)')
    parser.add_argument('--verbose', action='store_true', help='log at DEBUG level')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('ingest', help='forward fill and truncate a raw CSV into a clean one')
    p.add_argument('--schema')
    p.add_argument('--input', help='raw CSV')
    p.add_argument('--output', help='cleaned CSV')
    p.add_argument('--truncate-block', type=int, help='cut records to a multiple of this many steps')
    _add_layout_args(p)

    p = sub.add_parser('preprocess', help='forward fill, fit transforms, and encode the real CSV')
    p.add_argument('--schema')
    p.add_argument('--real', '--input', dest='real')
    p.add_argument('--encoded', '--out', dest='encoded', help='output encoded tensor')
    p.add_argument('--transforms', help='output transforms sidecar')
    p.add_argument('--truncate-block', type=int, help='cut records to a multiple of this many steps')
    _add_layout_args(p)

    p = sub.add_parser('train', help='train the GAN on an encoded tensor')
    p.add_argument('--schema', help='checked against the schema the encoded tensor was built from')
    p.add_argument('--encoded')
    p.add_argument('--out', help='checkpoint directory')
    p.add_argument('--epochs', type=int)
    p.add_argument('--gp-at', choices=[g.value for g in GradientPenaltyPoint])

    p = sub.add_parser('generate', help='sample synthetic patients to CSV')
    p.add_argument('--checkpoint')
    p.add_argument('--transforms')
    p.add_argument('--count', type=int)
    p.add_argument('--out')
    _add_layout_args(p)

    p = sub.add_parser('validate', help='stage 1-3 validation of a synthetic CSV')
    p.add_argument('--schema')
    p.add_argument('--real')
    p.add_argument('--syn')
    p.add_argument('--transforms')
    p.add_argument('--out', help='report directory')
    _add_layout_args(p)

    p = sub.add_parser('risk', help='disclosure risk of a synthetic CSV')
    p.add_argument('--schema')
    p.add_argument('--real')
    p.add_argument('--syn')
    p.add_argument('--transforms')
    p.add_argument('--qids', help='e.g. "age:floor,gender"; default: the schema\'s flagged quasi-identifiers')
    p.add_argument('--threshold', type=float)
    p.add_argument('--population', help='population CSV for the population-to-sample risk')
    p.add_argument('--out', help='risk report JSON')
    _add_layout_args(p)

    p = sub.add_parser('report', help='Markdown summary of validation and risk outputs')
    p.add_argument('--validate-dir')
    p.add_argument('--risk')
    p.add_argument('--out')

    sub.add_parser('pipeline', help='run every stage from the config file')
    return parser


def _with_overrides(preprocess: PreprocessConfig, args: argparse.Namespace) -> PreprocessConfig:
    """Apply --id-col, --time-col and --truncate-block where the subcommand has them."""
    pairs = (('id_column', 'id_col'), ('time_column', 'time_col'), ('truncate_block', 'truncate_block'))
    overrides = {field: getattr(args, flag) for field, flag in pairs if getattr(args, flag, None) is not None}
    return replace(preprocess, **overrides)


def _optional(args: argparse.Namespace, flag: str, config: Optional[RunConfig], attr: str) -> Optional[str]:
    """Command-line value, else the matching run-config attribute, else None."""
    value = getattr(args, flag.replace('-', '_'))
    if value is not None:
        return value
    fallback = getattr(config, attr) if config is not None else None
    return str(fallback) if fallback is not None else None


def _pick(args: argparse.Namespace, flag: str, config: Optional[RunConfig], attr: str) -> str:
    value = _optional(args, flag, config, attr)
    if value is None:
        raise ConfigError(f"missing --{flag} (and no --config to take it from)")
    return value


def run_command(args: argparse.Namespace) -> ExitCode:
    config: Optional[RunConfig] = load_run_config(args.config) if args.config else None
    seed = resolve_seed(args.seed, config.seed if config else None)
    preprocess = _with_overrides(config.preprocess if config else PreprocessConfig(), args)

    if args.command == 'ingest':
        if args.output is None:
            raise ConfigError("missing --output")
        run_ingest(_pick(args, 'schema', config, 'schema'), _pick(args, 'input', config, 'real_csv'),
                   args.output, preprocess)
        return ExitCode.SUCCESS

    if args.command == 'preprocess':
        run_preprocess(_pick(args, 'schema', config, 'schema'), _pick(args, 'real', config, 'real_csv'),
                       _pick(args, 'encoded', config, 'encoded_path'),
                       _pick(args, 'transforms', config, 'transforms_path'), preprocess)
        return ExitCode.SUCCESS

    if args.command == 'train':
        train_cfg = config.train if config else TrainConfig()
        if args.epochs is not None:
            train_cfg.epochs = args.epochs
            train_cfg.curriculum = None
        if args.gp_at is not None:
            train_cfg.gp_at = GradientPenaltyPoint(args.gp_at)
        train_cfg.seed = stage_seed(train_cfg.seed, seed, 'train')
        run_train(_pick(args, 'encoded', config, 'encoded_path'), train_cfg,
                  _pick(args, 'out', config, 'checkpoint_dir'),
                  schema_path=_optional(args, 'schema', config, 'schema'))
        return ExitCode.SUCCESS

    if args.command == 'generate':
        gen_cfg = config.generate if config else GenerateConfig()
        count = args.count if args.count is not None else gen_cfg.count
        if count is None and config is not None:
            count = load_encoded(str(config.encoded_path)).n_patients
        if count is None:
            raise ConfigError("missing --count")
        run_generate(_pick(args, 'checkpoint', config, 'checkpoint_path'),
                     _pick(args, 'transforms', config, 'transforms_path'), count,
                     stage_seed(gen_cfg.seed, seed, 'generate'), _pick(args, 'out', config, 'synthetic_csv'),
                     gen_cfg, preprocess)
        return ExitCode.SUCCESS

    if args.command == 'validate':
        stage2_cfg = config.stage2 if config else Stage2Config()
        stage2_cfg.seed = stage_seed(stage2_cfg.seed, seed, 'validate')
        report = run_validate(_pick(args, 'schema', config, 'schema'), _pick(args, 'real', config, 'real_csv'),
                              _pick(args, 'syn', config, 'synthetic_csv'), _pick(args, 'out', config, 'validate_dir'),
                              stage2_cfg, preprocess, _optional(args, 'transforms', config, 'transforms_path'))
        return ExitCode.SUCCESS if report.realistic else ExitCode.VALIDATION_FAILED

    if args.command == 'risk':
        privacy = config.privacy if config else PrivacyConfig()
        overrides = {key: value for key, value in (('qids', args.qids), ('threshold', args.threshold),
                                                   ('population_csv', args.population)) if value is not None}
        privacy = replace(privacy, **overrides)
        report = run_risk(_pick(args, 'schema', config, 'schema'), _pick(args, 'real', config, 'real_csv'),
                          _pick(args, 'syn', config, 'synthetic_csv'), _pick(args, 'out', config, 'risk_path'),
                          privacy, preprocess, _optional(args, 'transforms', config, 'transforms_path'))
        return ExitCode.SUCCESS if report.passed else ExitCode.RISK_EXCEEDED

    if args.command == 'report':
        write_summary(_pick(args, 'validate-dir', config, 'validate_dir'),
                      _optional(args, 'risk', config, 'risk_path'),
                      _pick(args, 'out', config, 'summary_path'))
        return ExitCode.SUCCESS

    if config is None:
        raise ConfigError("pipeline needs --config")
    return SynthGymPipeline(config, seed).run()


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    # Load environment variables from .env file
    load_dotenv()
    setup_logging()
    args = build_parser().parse_args(argv)
    set_verbose(args.verbose)

    try:
        code = run_command(args)
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        code = ExitCode.OPERATIONAL_ERROR
    except SynthGymError as e:
        logger.error(f"{type(e).__name__}: {e}")
        code = ExitCode.OPERATIONAL_ERROR
    except (OSError, ValueError) as e:
        logger.error(f"Fatal error: {e}")
        code = ExitCode.OPERATIONAL_ERROR
    return int(code)


if __name__ == "__main__":
    sys.exit(main())
