"""Markdown summary of the validation and risk outputs."""

import json
from pathlib import Path
from typing import List, Optional, Tuple

from ..privacy.disclosure import RiskReport, load_risk_report
from ..validation.stage2 import Stage2Report, VariableVerdict, load_stage2_report
from ..utils.logging_config import logger

STAGE2_FILE = 'stage2.json'
STAGE3_FILE = 'stage3.json'
PASS_MARK = '✓'
FAIL_MARK = '✗'


def _mark(value: Optional[bool]) -> str:
    if value is None:
        return '-'
    return PASS_MARK if value else FAIL_MARK


def _counter(eta: Optional[int], passed: Optional[bool]) -> str:
    if eta is None:
        return '-'
    return f"{eta} {_mark(passed)}"


def _stage2_lines(report: Stage2Report) -> List[str]:
    lines = ['## Stage 2: statistical tests', '']
    lines.append(f"{report.iterations} iterations; a counter passes above "
                 f"{report.pass_fraction * report.iterations:g}.")
    lines.append('')
    if report.realistic:
        lines += ['All variables realistic.', '']

    passed: List[VariableVerdict] = [v for v in report.variables if v.ks_passed]
    failed: List[VariableVerdict] = [v for v in report.variables if not v.ks_passed]

    lines += ['### Passed the KS Test', '']
    if passed:
        lines += ['| Variable | KS |', '|---|---|']
        lines += [f"| {v.name} | {v.eta_ks} |" for v in passed]
    else:
        lines.append('None.')
    lines.append('')

    lines += ['### Failed the KS Test', '']
    if failed:
        lines += ['| Variable | KS | t-test | F-test | Three sigma | Realistic |', '|---|---|---|---|---|---|']
        for v in failed:
            lines.append(
                f"| {v.name} | {_counter(v.eta_ks, v.ks_passed)} | {_counter(v.eta_t, v.t_passed)} | "
                f"{_counter(v.eta_f, v.f_passed)} | {_counter(v.eta_three_sigma, v.three_sigma_passed)} | "
                f"{_mark(v.realistic)} |"
            )
    else:
        lines.append('None.')
    lines.append('')
    return lines


def _stage3_lines(summary: dict) -> List[str]:
    lines = ['## Stage 3: correlations', '', '| Matrix | Max abs difference | Pair |', '|---|---|---|']
    for kind, entry in summary.get('discrepancies', {}).items():
        pair = ' / '.join(entry['pair'])
        lines.append(f"| {kind} | {entry['max_abs_difference']:.3f} | {pair} |")
    lines.append('')
    return lines


def _risk_lines(report: RiskReport) -> List[str]:
    lines = ['## Disclosure risk', '']
    qids = ', '.join(report.qids) or '(none)'
    lines.append(f"Quasi-identifiers: {qids}; threshold {report.threshold:.2%}.")
    lines.append('')
    lines += ['| Metric | Value | Verdict |', '|---|---|---|']
    verdicts = report.verdicts
    lines.append(f"| synthetic-to-real risk | {report.synthetic_to_real_risk:.4%} | "
                 f"{_mark(verdicts['synthetic_to_real'])} |")
    if report.population_to_sample_risk is not None:
        lines.append(f"| population-to-sample risk | {report.population_to_sample_risk:.4%} | "
                     f"{_mark(verdicts['population_to_sample'])} |")
    if report.min_euclidean is not None:
        d = report.min_euclidean
        lines.append(f"| minimum Euclidean distance | {d.distance:.4f} (real {d.real_id}, synthetic {d.syn_id}) | - |")
    lines.append('')
    return lines


def build_summary(validate_dir: str, risk_path: Optional[str] = None) -> Tuple[str, List[str]]:
    """Render the summary; returns the Markdown and the list of missing inputs."""
    base = Path(validate_dir)
    missing = []
    lines = ['# Synthetic data validation summary', '']

    stage2_path = base / STAGE2_FILE
    if stage2_path.exists():
        lines += _stage2_lines(load_stage2_report(str(stage2_path)))
    else:
        missing.append(str(stage2_path))

    stage3_path = base / STAGE3_FILE
    if stage3_path.exists():
        with open(stage3_path, 'r', encoding='utf-8') as f:
            lines += _stage3_lines(json.load(f))
    else:
        missing.append(str(stage3_path))

    if risk_path and Path(risk_path).exists():
        lines += _risk_lines(load_risk_report(risk_path))
    else:
        lines += ['## Disclosure risk', '', 'risk: not run', '']

    if missing:
        lines += ['## Missing inputs', '']
        lines += [f"- {path}" for path in missing]
        lines.append('')
    return '\n'.join(lines), missing


def write_summary(validate_dir: str, risk_path: Optional[str], out_path: str) -> List[str]:
    text, missing = build_summary(validate_dir, risk_path)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, 'w', encoding='utf-8') as f:
        f.write(text)
    if missing:
        logger.warning(f"Summary written with missing inputs: {missing}")
    logger.info(f"Summary written to {out_path}")
    return missing
