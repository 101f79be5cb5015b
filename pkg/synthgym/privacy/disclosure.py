"""Disclosure risk: nearest real/synthetic records and equivalence-class risks."""

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..core.config import PrivacyConfig
from ..core.schema import DatasetSchema, Panel
from ..utils.constants import DISTANCE_CHUNK_SIZE
from ..utils.errors import EmptyDatasetError, SchemaError
from ..utils.logging_config import logger

NUMERIC_RULES = ('floor', 'round', 'exact')
MISSING_KEY = 'NA'


@dataclass(frozen=True)
class QidRule:
    """A quasi-identifier and how its numeric values are coarsened."""
    name: str
    rule: str = 'floor'


def parse_qids(spec: str) -> List[QidRule]:
    """Parse "age:floor,gender" into rules; numeric qids floor by default."""
    rules = []
    for item in filter(None, (part.strip() for part in (spec or '').split(','))):
        name, _, rule = item.partition(':')
        rule = rule.strip().lower() or 'floor'
        if rule not in NUMERIC_RULES:
            raise ValueError(f"unknown discretization rule '{rule}' for quasi-identifier '{name}'")
        rules.append(QidRule(name.strip(), rule))
    return rules


def schema_qid_rules(schema: DatasetSchema) -> List[QidRule]:
    """Rules for the variables the schema flags as quasi-identifiers."""
    return [QidRule(var.name) for var in schema.variables if var.is_quasi_identifier]


def _discretize(value: float, rule: str) -> Hashable:
    if np.isnan(value):
        return MISSING_KEY
    if rule == 'floor':
        return int(math.floor(value))
    if rule == 'round':
        return int(round(value))
    return float(value)


@dataclass
class EquivalenceClassing:
    """Record keys over the quasi-identifiers and the size of each class."""
    qids: Tuple[str, ...]
    keys: List[Tuple] = field(default_factory=list)

    @property
    def sizes(self) -> Counter:
        return Counter(self.keys)

    @property
    def n_records(self) -> int:
        return len(self.keys)

    def size_histogram(self) -> Dict[int, int]:
        """Number of classes of each size."""
        return dict(sorted(Counter(self.sizes.values()).items()))


def build_equivalence_classes(panel: Panel, rules: Sequence[QidRule]) -> EquivalenceClassing:
    """Key every patient by its first-timestep quasi-identifier values."""
    schema = panel.schema
    missing = [rule.name for rule in rules if rule.name not in schema.names]
    if missing:
        raise SchemaError([f"quasi-identifier '{name}' is not a schema variable" for name in missing])

    first = panel.first_timestep()
    columns = []
    for rule in rules:
        var = schema.variable(rule.name)
        cells = first[:, schema.index(rule.name)]
        if var.is_numeric:
            columns.append([_discretize(c, rule.rule) for c in cells])
        else:
            columns.append([MISSING_KEY if np.isnan(c) else var.class_labels[int(c)] for c in cells])

    keys = [tuple(col[i] for col in columns) for i in range(panel.n_patients)]
    return EquivalenceClassing(tuple(rule.name for rule in rules), keys)


def _scaling(values: Optional[Sequence[float]], n: int, name: str) -> np.ndarray:
    if values is None:
        return np.ones(n)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (n,):
        raise ValueError(f"{name} needs one value per record ({n}), got {values.shape}")
    return values


def synthetic_to_real_risk(real: EquivalenceClassing, syn: EquivalenceClassing,
                           lambdas: Optional[Sequence[float]] = None,
                           reidentified: Optional[Sequence[float]] = None) -> float:
    """(1/S) * sum over synthetic records of lambda_s * r_s * I_s / F_s."""
    if real.qids != syn.qids:
        raise ValueError("classings were built over different quasi-identifiers")
    S = syn.n_records
    if S == 0:
        raise EmptyDatasetError("synthetic dataset")
    lam = _scaling(lambdas, S, 'lambda_s')
    r = _scaling(reidentified, S, 'r_s')

    real_sizes = real.sizes
    terms = np.array([1.0 / real_sizes[key] if real_sizes.get(key, 0) >= 1 else 0.0 for key in syn.keys])
    return float(np.sum(lam * r * terms) / S)


def population_to_sample_risk(population: EquivalenceClassing, sample: EquivalenceClassing,
                              lambdas: Optional[Sequence[float]] = None,
                              reidentified: Optional[Sequence[float]] = None) -> float:
    """(1/P) * sum over sample records of lambda_s * r_s / f_s, f_s the sample class size."""
    P = population.n_records
    if P == 0:
        raise EmptyDatasetError("population dataset")
    n = sample.n_records
    lam = _scaling(lambdas, n, 'lambda_s')
    r = _scaling(reidentified, n, 'r_s')
    sample_sizes = sample.sizes
    terms = np.array([1.0 / sample_sizes[key] for key in sample.keys])
    return float(np.sum(lam * r * terms) / P) if n else 0.0


@dataclass(frozen=True)
class DistanceResult:
    distance: float
    real_index: int
    syn_index: int
    real_id: str
    syn_id: str


def patient_vectors(panel: Panel) -> np.ndarray:
    """One flat vector per patient; class cells as indices, missing and padding as 0."""
    return np.nan_to_num(panel.values, nan=0.0).reshape(panel.n_patients, -1)


def min_euclidean_distance(real: Panel, syn: Panel, prefilter: bool = True,
                           chunk_size: int = DISTANCE_CHUNK_SIZE) -> DistanceResult:
    """Smallest L2 distance over all real x synthetic patient pairs.

    Ties go to the lowest (real, synthetic) index pair. The optional pre-filter
    skips real rows whose norm gap already exceeds the best distance.
    """
    if real.schema.n_variables != syn.schema.n_variables or \
            real.schema.sequence_length != syn.schema.sequence_length:
        raise SchemaError(["real and synthetic panels have different record shapes"])
    if real.n_patients == 0 or syn.n_patients == 0:
        raise EmptyDatasetError("dataset", "distance needs patients on both sides")

    real_vec, syn_vec = patient_vectors(real), patient_vectors(syn)
    real_norm = np.linalg.norm(real_vec, axis=1)
    syn_norm = np.linalg.norm(syn_vec, axis=1)

    best, best_pair = math.inf, (real.n_patients, syn.n_patients)
    for start in range(0, syn.n_patients, chunk_size):
        stop = min(start + chunk_size, syn.n_patients)
        rows = np.arange(real.n_patients)
        if prefilter and math.isfinite(best):
            gap = np.abs(real_norm[:, None] - syn_norm[None, start:stop]).min(axis=1)
            rows = rows[gap <= best * (1.0 + 1e-9) + 1e-12]
            if rows.size == 0:
                continue
        d = cdist(real_vec[rows], syn_vec[start:stop])
        m = float(d.min())
        if m > best:
            continue
        hits = np.argwhere(d == m)
        pair = min((int(rows[i]), int(start + j)) for i, j in hits)
        if m < best or pair < best_pair:
            best, best_pair = m, pair

    i, j = best_pair
    return DistanceResult(best, i, j, real.patient_ids[i], syn.patient_ids[j])


@dataclass
class RiskReport:
    """Risk values, their formula inputs, and per-metric verdicts against the threshold."""
    threshold: float
    qids: Tuple[str, ...]
    min_euclidean: Optional[DistanceResult]
    synthetic_to_real_risk: float
    synthetic_records: int
    matched_records: int
    real_class_sizes: Dict[int, int]
    population_to_sample_risk: Optional[float] = None
    population_records: Optional[int] = None

    @property
    def verdicts(self) -> Dict[str, bool]:
        result = {'synthetic_to_real': self.synthetic_to_real_risk < self.threshold}
        if self.population_to_sample_risk is not None:
            result['population_to_sample'] = self.population_to_sample_risk < self.threshold
        return result

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'threshold': self.threshold,
            'qids': list(self.qids),
            'min_euclidean': asdict(self.min_euclidean) if self.min_euclidean else None,
            'synthetic_to_real_risk': self.synthetic_to_real_risk,
            'synthetic_records': self.synthetic_records,
            'matched_records': self.matched_records,
            'real_class_sizes': {str(k): v for k, v in self.real_class_sizes.items()},
            'population_to_sample_risk': self.population_to_sample_risk,
            'population_records': self.population_records,
            'verdicts': self.verdicts,
            'passed': self.passed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RiskReport':
        distance = data.get('min_euclidean')
        return cls(
            threshold=float(data['threshold']),
            qids=tuple(data['qids']),
            min_euclidean=DistanceResult(**distance) if distance else None,
            synthetic_to_real_risk=float(data['synthetic_to_real_risk']),
            synthetic_records=int(data['synthetic_records']),
            matched_records=int(data['matched_records']),
            real_class_sizes={int(k): int(v) for k, v in data['real_class_sizes'].items()},
            population_to_sample_risk=data.get('population_to_sample_risk'),
            population_records=data.get('population_records'),
        )


def risk_run(real: Panel, syn: Panel, config: PrivacyConfig, population: Optional[Panel] = None) -> RiskReport:
    rules = parse_qids(config.qids) or schema_qid_rules(real.schema)
    real_classes = build_equivalence_classes(real, rules)
    syn_classes = build_equivalence_classes(syn, rules)
    risk = synthetic_to_real_risk(real_classes, syn_classes)
    real_sizes = real_classes.sizes

    report = RiskReport(
        threshold=config.threshold,
        qids=real_classes.qids,
        min_euclidean=min_euclidean_distance(real, syn, prefilter=config.prefilter),
        synthetic_to_real_risk=risk,
        synthetic_records=syn_classes.n_records,
        matched_records=sum(1 for key in syn_classes.keys if key in real_sizes),
        real_class_sizes=real_classes.size_histogram(),
    )
    if population is not None:
        population_classes = build_equivalence_classes(population, rules)
        report.population_to_sample_risk = population_to_sample_risk(population_classes, real_classes)
        report.population_records = population_classes.n_records

    logger.info(f"Synthetic-to-real risk {risk:.4%} (threshold {config.threshold:.2%}); "
                f"min distance {report.min_euclidean.distance:.4g}")
    if not report.passed:
        logger.warning(f"Disclosure risk at or above threshold: {report.verdicts}")
    return report


def save_risk_report(path: str, report: RiskReport):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(report.to_dict(), f, indent=2)


def load_risk_report(path: str) -> RiskReport:
    with open(path, 'r', encoding='utf-8') as f:
        return RiskReport.from_dict(json.load(f))
