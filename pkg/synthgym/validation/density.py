"""Stage one: density tables and descriptive statistics of real and synthetic panels."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..core.schema import Panel, VariableSpec
from ..utils.constants import KDE_GRID_POINTS
from ..utils.errors import EmptyDatasetError, SchemaError
from ..utils.logging_config import logger


@dataclass
class DensityTable:
    """KDE curves on a shared grid (numeric) or class shares in percent."""
    variable: str
    grid: Optional[np.ndarray] = None
    real: Optional[np.ndarray] = None
    synthetic: Optional[np.ndarray] = None
    shares: Dict[str, Dict[str, float]] = field(default_factory=dict)
    point_mass: List[str] = field(default_factory=list)


def _kde(values: np.ndarray, grid: np.ndarray) -> Tuple[np.ndarray, bool]:
    if values.size < 2 or np.ptp(values) == 0.0:
        density = np.zeros_like(grid)
        density[int(np.argmin(np.abs(grid - values[0])))] = 1.0
        return density, True
    return stats.gaussian_kde(values, bw_method='silverman')(grid), False


def class_shares(values: np.ndarray, labels) -> Dict[str, float]:
    counts = np.bincount(values.astype(np.int64), minlength=len(labels))
    return {label: 100.0 * count / values.size for label, count in zip(labels, counts)}


def density_export(real_column, syn_column, var: VariableSpec) -> DensityTable:
    real = np.asarray(real_column, dtype=np.float64)
    syn = np.asarray(syn_column, dtype=np.float64)
    if real.size == 0 or syn.size == 0:
        raise EmptyDatasetError("column", f"'{var.name}' has no values to estimate a density from")

    if not var.is_numeric:
        return DensityTable(var.name, shares={
            'real': class_shares(real, var.class_labels),
            'synthetic': class_shares(syn, var.class_labels),
        })

    low = min(real.min(), syn.min())
    high = max(real.max(), syn.max())
    if low == high:
        low, high = low - 0.5, high + 0.5
    grid = np.linspace(low, high, KDE_GRID_POINTS)
    table = DensityTable(var.name, grid=grid)
    table.real, real_point = _kde(real, grid)
    table.synthetic, syn_point = _kde(syn, grid)
    table.point_mass = [name for name, flag in (('real', real_point), ('synthetic', syn_point)) if flag]
    if table.point_mass:
        logger.warning(f"Zero-variance column for '{var.name}' ({table.point_mass}); density is a point mass")
    return table


def stage1_run(real: Panel, syn: Panel) -> List[DensityTable]:
    if real.schema != syn.schema:
        raise SchemaError(["real and synthetic panels use different schemas"])
    return [density_export(real.column(v.name), syn.column(v.name), v) for v in real.schema.variables]


def describe_panel(panel: Panel) -> pd.DataFrame:
    """Quartiles of numeric variables and class shares (%) of the others."""
    rows = []
    for var in panel.schema.variables:
        column = panel.column(var.name)
        if var.is_numeric:
            q1, median, q3 = np.percentile(column, [25, 50, 75]) if column.size else (np.nan,) * 3
            rows += [
                {'variable': var.name, 'statistic': 'Q1', 'value': q1},
                {'variable': var.name, 'statistic': 'median', 'value': median},
                {'variable': var.name, 'statistic': 'Q3', 'value': q3},
            ]
        elif column.size:
            for label, share in class_shares(column, var.class_labels).items():
                rows.append({'variable': var.name, 'statistic': f'{label} %', 'value': share})
    return pd.DataFrame(rows, columns=['variable', 'statistic', 'value'])


def save_stage1(out_dir: str, tables: List[DensityTable], real: Panel, syn: Panel):
    """Write densities.csv, class_shares.csv and describe_{real,synthetic}.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    density_rows, share_rows = [], []
    for table in tables:
        if table.grid is not None:
            for source, curve in (('real', table.real), ('synthetic', table.synthetic)):
                density_rows.append(pd.DataFrame({
                    'variable': table.variable, 'source': source, 'x': table.grid, 'density': curve,
                }))
        for source, shares in table.shares.items():
            for label, share in shares.items():
                share_rows.append({'variable': table.variable, 'source': source, 'class': label, 'percent': share})

    densities = pd.concat(density_rows, ignore_index=True) if density_rows else \
        pd.DataFrame(columns=['variable', 'source', 'x', 'density'])
    densities.to_csv(out / 'densities.csv', index=False, lineterminator='\n')
    pd.DataFrame(share_rows, columns=['variable', 'source', 'class', 'percent']).to_csv(
        out / 'class_shares.csv', index=False, lineterminator='\n')
    describe_panel(real).to_csv(out / 'describe_real.csv', index=False, lineterminator='\n')
    describe_panel(syn).to_csv(out / 'describe_synthetic.csv', index=False, lineterminator='\n')
