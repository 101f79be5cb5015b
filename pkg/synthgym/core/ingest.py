"""CSV panels, measurement flags with forward fill, and length truncation."""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .schema import DatasetSchema, Panel, measurement_companion
from ..utils.errors import PanelError
from ..utils.logging_config import logger

FLAG_TRUE = 1.0
FLAG_FALSE = 0.0


@dataclass(frozen=True)
class CsvLayout:
    """Column naming of a panel CSV."""
    id_column: str
    time_column: str
    value_columns: Tuple[str, ...]

    @classmethod
    def for_schema(cls, schema: DatasetSchema, id_column: str = 'id', time_column: str = 'time') -> 'CsvLayout':
        return cls(id_column=id_column, time_column=time_column, value_columns=schema.names)

    def check(self, schema: DatasetSchema):
        if tuple(self.value_columns) != schema.names:
            raise PanelError(
                f"layout value columns {list(self.value_columns)} do not match schema variables {list(schema.names)}"
            )
        if self.id_column in schema.names or self.time_column in schema.names:
            raise PanelError("id/time columns must not reuse a variable name")

    @property
    def header(self) -> List[str]:
        return [self.id_column, self.time_column, *self.value_columns]


def _parse_column(raw: pd.Series, var) -> np.ndarray:
    text = raw.str.strip()
    missing = text == ''
    if var.is_numeric:
        try:
            parsed = pd.to_numeric(text.mask(missing), errors='raise')
        except (ValueError, TypeError) as e:
            raise PanelError(f"non-numeric value in '{var.name}': {e}") from None
        return parsed.to_numpy(dtype=np.float64)

    lookup: Dict[str, int] = {label: k for k, label in enumerate(var.class_labels)}
    unknown = sorted(set(text[~missing]) - set(lookup))
    if unknown:
        raise PanelError(f"unknown class label '{unknown[0]}' for '{var.name}'")
    return text.map(lookup).astype('float64').to_numpy()


def load_csv_panel(path: str, schema: DatasetSchema, layout: CsvLayout) -> Panel:
    """Read one row per (patient, timestep) into a Panel."""
    layout.check(schema)
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')

    missing_columns = [col for col in layout.header if col not in df.columns]
    if missing_columns:
        raise PanelError(f"missing column(s) in {path}: {missing_columns}")

    T = schema.sequence_length
    if df.empty:
        logger.info(f"Loaded empty panel from {path}")
        return Panel(schema, (), np.empty((0, T, schema.n_variables)), np.empty(0, dtype=np.int64))

    codes, patient_ids = pd.factorize(df[layout.id_column].str.strip(), sort=False)
    times = pd.to_numeric(df[layout.time_column].str.strip(), errors='coerce').to_numpy(dtype=np.float64)
    if np.isnan(times).any():
        raise PanelError(f"ragged time index in {path}: non-numeric time values")

    order = np.lexsort((times, codes))
    sorted_codes = codes[order]
    sorted_times = times[order]
    repeats = (np.diff(sorted_codes) == 0) & (np.diff(sorted_times) == 0)
    if repeats.any():
        pid = patient_ids[sorted_codes[1:][repeats][0]]
        raise PanelError(f"ragged time index in {path}: duplicate timestep for patient {pid}")

    lengths = np.bincount(codes, minlength=len(patient_ids))
    if lengths.max() > T:
        pid = patient_ids[int(np.argmax(lengths))]
        raise PanelError(f"patient {pid} has {lengths.max()} rows, more than sequence length {T}")

    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    positions = np.arange(len(order)) - starts[sorted_codes]

    values = np.full((len(patient_ids), T, schema.n_variables), np.nan)
    for v, var in enumerate(schema.variables):
        column = _parse_column(df[var.name], var)
        values[sorted_codes, positions, v] = column[order]

    logger.info(f"Loaded {len(patient_ids)} patients ({len(df)} rows) from {path}")
    return Panel(schema, tuple(patient_ids), values, lengths)


def _format_cell(value: float, labels: Sequence[str]) -> str:
    if np.isnan(value):
        return ''
    if labels:
        return labels[int(value)]
    return repr(float(value))


def write_csv_panel(panel: Panel, layout: CsvLayout, path: str):
    """Write a panel as one row per (patient, timestep); class cells as labels."""
    layout.check(panel.schema)
    rows = []
    for p, pid in enumerate(panel.patient_ids):
        for t in range(panel.lengths[p]):
            row = [pid, str(t)]
            for v, var in enumerate(panel.schema.variables):
                row.append(_format_cell(panel.values[p, t, v], var.class_labels))
            rows.append(row)

    df = pd.DataFrame(rows, columns=layout.header)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, lineterminator='\n', encoding='utf-8')
    except OSError as e:
        raise PanelError(f"cannot write panel to {path}: {e}") from e
    logger.info(f"Wrote {panel.n_patients} patients ({len(rows)} rows) to {path}")


def forward_fill_with_flags(raw: Panel, flagged_vars: Sequence[str]) -> Panel:
    """Carry the last observation forward and record where measurements happened.

    Cells before a patient's first observation take that first observed value.
    Flag cells that are already populated are kept as they are.
    """
    schema = raw.schema
    values = np.array(raw.values)
    mask = raw.mask

    observed: Dict[str, np.ndarray] = {}
    for name in flagged_vars:
        if measurement_companion(schema, name) is None:
            raise PanelError(f"variable '{name}' has no measurement flag companion in the schema")
        v = schema.index(name)
        observed[name] = ~np.isnan(values[..., v]) & mask

        empty = np.flatnonzero(~observed[name].any(axis=1))
        if empty.size:
            pid = raw.patient_ids[empty[0]]
            raise PanelError(f"variable '{name}' is entirely missing for patient {pid}")

        grid = pd.DataFrame(values[..., v])
        values[..., v] = grid.ffill(axis=1).bfill(axis=1).to_numpy()

    flags_done = set()
    for name in flagged_vars:
        flag = measurement_companion(schema, name)
        if flag.name in flags_done:
            continue
        flags_done.add(flag.name)
        covered = [observed[m] for m in flag.measured_variables if m in observed]
        measured = np.logical_or.reduce(covered)
        f = schema.index(flag.name)
        current = values[..., f]
        computed = np.where(measured, FLAG_TRUE, FLAG_FALSE)
        values[..., f] = np.where(np.isnan(current), computed, current)

    return raw.replace_values(values)


def truncate_to_multiple(panel: Panel, block: int) -> Panel:
    """Cut each record to the largest multiple of `block`; drop records that reach zero."""
    if block < 1:
        raise ValueError(f"block must be >= 1, got {block}")

    new_lengths = (panel.lengths // block) * block
    keep = np.flatnonzero(new_lengths > 0)
    dropped = [panel.patient_ids[i] for i in np.flatnonzero(new_lengths == 0)]
    if dropped:
        logger.info(f"Truncation to multiples of {block} dropped {len(dropped)} patient(s): {dropped}")

    shortened = sum(int(a != b) for a, b in zip(panel.lengths, new_lengths))
    logger.debug(f"Truncation shortened {shortened} record(s)")

    return Panel(
        schema=panel.schema,
        patient_ids=tuple(panel.patient_ids[i] for i in keep),
        values=panel.values[keep],
        lengths=new_lengths[keep],
    )
