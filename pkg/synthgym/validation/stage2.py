"""Stage two: repeated small-batch statistical tests per variable."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .stats_tests import anova_f_test, f_test, ks2_test, t_test, three_sigma_test
from ..core.config import Stage2Config
from ..core.schema import Panel, VariableSpec
from ..utils.errors import EmptyDatasetError, SchemaError
from ..utils.logging_config import logger

ROUTE_KS = 'ks'
ROUTE_THREE_SIGMA = 'three_sigma'
ROUTE_ANOVA = 'anova'
ROUTE_FAILED = 'failed'


@dataclass
class VariableVerdict:
    """Counters of one variable and the verdict they lead to."""
    name: str
    kind: str
    eta_ks: int
    eta_t: Optional[int] = None
    eta_f: Optional[int] = None
    eta_three_sigma: Optional[int] = None
    ks_passed: bool = False
    t_passed: Optional[bool] = None
    f_passed: Optional[bool] = None
    three_sigma_passed: Optional[bool] = None
    realistic: bool = False
    route: str = ROUTE_FAILED


@dataclass
class Stage2Report:
    iterations: int
    pass_fraction: float
    variables: List[VariableVerdict] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def realistic(self) -> bool:
        return all(v.realistic for v in self.variables)

    @property
    def failed(self) -> List[str]:
        return [v.name for v in self.variables if not v.realistic]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iterations': self.iterations,
            'pass_fraction': self.pass_fraction,
            'realistic': self.realistic,
            'config': self.config,
            'variables': [asdict(v) for v in self.variables],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Stage2Report':
        return cls(
            iterations=int(data['iterations']),
            pass_fraction=float(data['pass_fraction']),
            variables=[VariableVerdict(**v) for v in data['variables']],
            config=dict(data.get('config', {})),
        )


def counter_passes(eta: int, iterations: int, pass_fraction: float) -> bool:
    """A counter passes when it is strictly above pass_fraction * iterations."""
    return eta > pass_fraction * iterations


def _minmax(real: np.ndarray):
    low, span = real.min(), real.max() - real.min()
    if span == 0.0:
        return lambda x: x - low
    return lambda x: (x - low) / span


def _numeric_verdict(var: VariableSpec, real: np.ndarray, syn: np.ndarray,
                     config: Stage2Config, rng: np.random.Generator) -> VariableVerdict:
    scale = _minmax(real) if config.minmax else (lambda x: x)
    eta = {'ks': 0, 't': 0, 'f': 0, '3s': 0}
    for _ in range(config.iterations):
        batch_r = scale(rng.choice(real, size=config.sample_size, replace=True))
        batch_s = scale(rng.choice(syn, size=config.sample_size, replace=True))
        eta['ks'] += ks2_test(batch_s, batch_r).p_value > config.alpha_ks
        eta['t'] += t_test(batch_s, batch_r).p_value > config.alpha_t
        eta['f'] += f_test(batch_s, batch_r).p_value > config.alpha_f
        eta['3s'] += three_sigma_test(batch_r, batch_s, config.sigma_multiplier, config.three_sigma_coverage).passed

    passes = {key: counter_passes(int(n), config.iterations, config.pass_fraction) for key, n in eta.items()}
    verdict = VariableVerdict(
        name=var.name, kind=var.kind.value,
        eta_ks=int(eta['ks']), eta_t=int(eta['t']), eta_f=int(eta['f']), eta_three_sigma=int(eta['3s']),
        ks_passed=passes['ks'], t_passed=passes['t'], f_passed=passes['f'], three_sigma_passed=passes['3s'],
    )
    if verdict.ks_passed:
        verdict.realistic, verdict.route = True, ROUTE_KS
    elif verdict.three_sigma_passed:
        verdict.realistic, verdict.route = True, ROUTE_THREE_SIGMA
    return verdict


def _categorical_verdict(var: VariableSpec, real: np.ndarray, syn: np.ndarray,
                         config: Stage2Config, rng: np.random.Generator) -> VariableVerdict:
    eta_ks = eta_f = 0
    for _ in range(config.iterations):
        batch_r = rng.choice(real, size=config.sample_size, replace=True)
        batch_s = rng.choice(syn, size=config.sample_size, replace=True)
        eta_ks += ks2_test(batch_s, batch_r).p_value > config.alpha_ks
        eta_f += anova_f_test(batch_s, batch_r, var.class_count).p_value > config.alpha_f

    verdict = VariableVerdict(
        name=var.name, kind=var.kind.value, eta_ks=int(eta_ks), eta_f=int(eta_f),
        ks_passed=counter_passes(int(eta_ks), config.iterations, config.pass_fraction),
        f_passed=counter_passes(int(eta_f), config.iterations, config.pass_fraction),
    )
    if verdict.ks_passed:
        verdict.realistic, verdict.route = True, ROUTE_KS
    elif verdict.f_passed:
        verdict.realistic, verdict.route = True, ROUTE_ANOVA
    return verdict


def stage2_run(real: Panel, syn: Panel, config: Stage2Config) -> Stage2Report:
    """Run the test battery for every variable; class variables are compared by ordinal rank."""
    if real.schema != syn.schema:
        raise SchemaError(["real and synthetic panels use different schemas"])
    rng = np.random.default_rng(config.seed)
    report = Stage2Report(iterations=config.iterations, pass_fraction=config.pass_fraction, config=asdict(config))

    for var in real.schema.variables:
        real_col, syn_col = real.column(var.name), syn.column(var.name)
        if real_col.size == 0 or syn_col.size == 0:
            raise EmptyDatasetError("variable column", f"'{var.name}' has no observed values")
        if var.is_numeric:
            verdict = _numeric_verdict(var, real_col, syn_col, config, rng)
        else:
            verdict = _categorical_verdict(var, real_col, syn_col, config, rng)
        logger.debug(f"Stage 2 '{var.name}': eta_ks={verdict.eta_ks} route={verdict.route}")
        report.variables.append(verdict)

    logger.info(f"Stage 2 finished: {len(report.variables) - len(report.failed)}/{len(report.variables)} "
                f"variables realistic")
    return report


def save_stage2_report(path: str, report: Stage2Report):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(report.to_dict(), f, indent=2)


def load_stage2_report(path: str) -> Stage2Report:
    with open(path, 'r', encoding='utf-8') as f:
        return Stage2Report.from_dict(json.load(f))
