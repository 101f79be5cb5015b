"""Stage three: static and trend/cycle Kendall correlation matrices."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
from scipy import signal

from ..core.schema import Panel
from ..utils.constants import FLAT_SERIES_RTOL
from ..utils.errors import EmptyDatasetError, PanelError, SchemaError
from ..utils.logging_config import logger

MATRIX_KINDS = ('static', 'trend', 'cycle')


def _kendall_matrix(rows: np.ndarray, names) -> np.ndarray:
    """tau-b between columns; undefined entries are 0 and the diagonal is 1."""
    frame = pd.DataFrame(rows, columns=list(names))
    matrix = frame.corr(method='kendall').to_numpy(dtype=np.float64, copy=True)
    matrix = np.nan_to_num(matrix, nan=0.0)
    np.fill_diagonal(matrix, 1.0)
    return matrix


def static_correlations(panel: Panel) -> np.ndarray:
    """Kendall tau-b over all pooled (patient, timestep) rows."""
    if panel.n_patients == 0:
        raise EmptyDatasetError("panel", "static correlations need at least one patient")
    rows = panel.values[panel.mask]
    return _kendall_matrix(rows, panel.schema.names)


def _is_flat(column: np.ndarray, scale: float) -> bool:
    return float(np.ptp(column)) <= FLAT_SERIES_RTOL * scale


def detrend_linear(series) -> Tuple[np.ndarray, np.ndarray]:
    """Split a series into its least-squares line and the residual cycle.

    A constant series is its own trend with an exactly zero cycle.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size < 2 or np.ptp(x) == 0.0:
        return x.copy(), np.zeros_like(x)
    cycle = signal.detrend(x, type='linear')
    return x - cycle, cycle


def dynamic_correlations(panel: Panel) -> Tuple[np.ndarray, np.ndarray]:
    """Per-patient tau-b of trends and of cycles, averaged over patients.

    Trend or cycle columns whose range is rounding noise relative to the
    series magnitude count as constant and correlate 0 with everything.
    """
    if panel.n_patients == 0:
        raise EmptyDatasetError("panel", "dynamic correlations need at least one patient")
    V = panel.schema.n_variables
    trend_sum = np.zeros((V, V))
    cycle_sum = np.zeros((V, V))

    short = 0
    for p in range(panel.n_patients):
        record = panel.values[p, : panel.lengths[p]]
        if np.isnan(record).any():
            raise PanelError(f"patient {panel.patient_ids[p]} has missing values; forward fill first")
        if record.shape[0] < 2:
            short += 1
            trend_sum += np.eye(V)
            cycle_sum += np.eye(V)
            continue
        trends = np.empty_like(record)
        cycles = np.empty_like(record)
        for v in range(V):
            trend, cycle = detrend_linear(record[:, v])
            scale = max(1.0, float(np.abs(record[:, v]).max()))
            trends[:, v] = 0.0 if _is_flat(trend, scale) else trend
            cycles[:, v] = 0.0 if _is_flat(cycle, scale) else cycle
        trend_sum += _kendall_matrix(trends, panel.schema.names)
        cycle_sum += _kendall_matrix(cycles, panel.schema.names)

    if short:
        logger.warning(f"{short} patient(s) with a single timestep contribute zero dynamic correlation")
    return trend_sum / panel.n_patients, cycle_sum / panel.n_patients


@dataclass
class Discrepancy:
    kind: str
    max_abs_difference: float
    pair: Tuple[str, str]


@dataclass
class CorrelationReport:
    """Real and synthetic matrices of each kind, with the largest disagreement per kind."""
    names: Tuple[str, ...]
    real: Dict[str, np.ndarray]
    synthetic: Dict[str, np.ndarray]

    def discrepancies(self) -> List[Discrepancy]:
        result = []
        for kind in MATRIX_KINDS:
            diff = np.abs(self.real[kind] - self.synthetic[kind])
            i, j = np.unravel_index(int(np.argmax(diff)), diff.shape)
            result.append(Discrepancy(kind, float(diff[i, j]), (self.names[i], self.names[j])))
        return result

    def summary(self) -> Dict[str, Dict]:
        return {
            d.kind: {'max_abs_difference': d.max_abs_difference, 'pair': list(d.pair)}
            for d in self.discrepancies()
        }


def correlation_report(real: Panel, syn: Panel) -> CorrelationReport:
    if real.schema != syn.schema:
        raise SchemaError(["real and synthetic panels use different schemas"])
    matrices = {}
    for label, panel in (('real', real), ('synthetic', syn)):
        trend, cycle = dynamic_correlations(panel)
        matrices[label] = {'static': static_correlations(panel), 'trend': trend, 'cycle': cycle}
    report = CorrelationReport(real.schema.names, matrices['real'], matrices['synthetic'])
    for d in report.discrepancies():
        logger.info(f"Largest {d.kind} correlation gap {d.max_abs_difference:.3f} for {d.pair}")
    return report


def save_correlation_report(out_dir: str, report: CorrelationReport):
    """One CSV per matrix plus a JSON summary of the discrepancies."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for label, matrices in (('real', report.real), ('synthetic', report.synthetic)):
        for kind, matrix in matrices.items():
            frame = pd.DataFrame(matrix, index=list(report.names), columns=list(report.names))
            frame.to_csv(out / f"correlation_{kind}_{label}.csv", lineterminator='\n')
    with open(out / 'stage3.json', 'w', encoding='utf-8') as f:
        json.dump({'variables': list(report.names), 'discrepancies': report.summary()}, f, indent=2)
