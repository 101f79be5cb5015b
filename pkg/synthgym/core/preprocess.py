"""Per-variable transforms, one-hot encoding, and the back-transformation."""

import json
import pickle
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize, special, stats

from .schema import DatasetSchema, Panel, Segment, VariableSpec, schema_hash
from ..utils.constants import (
    ActivationKind,
    BOXCOX_LAMBDA_BOUNDS,
    BOXCOX_LAMBDA_TOL,
    DECILE_COUNT,
    DECILE_LABELS,
    FORMAT_VERSION,
    POSITIVITY_EPS,
    TransformMethod,
    VariableKind,
)
from ..utils.errors import PanelError, TransformError
from ..utils.logging_config import logger

POWER_METHODS = (TransformMethod.BOXCOX_MINMAX, TransformMethod.LOG_MINMAX)


@dataclass(frozen=True)
class FittedTransform:
    """The recorded transform of one numeric variable, enough to invert it."""
    variable: str
    method: TransformMethod
    boxcox_lambda: Optional[float] = None
    shift: float = 0.0
    minmax_min: float = 0.0
    minmax_range: float = 1.0
    decile_cuts: Tuple[float, ...] = ()
    data_min: float = 0.0
    data_max: float = 0.0

    @property
    def is_decile(self) -> bool:
        return self.method is TransformMethod.DECILE_TO_CATEGORICAL

    def power(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.method is TransformMethod.BOXCOX_MINMAX:
            return special.boxcox(x + self.shift, self.boxcox_lambda)
        if self.method is TransformMethod.LOG_MINMAX:
            return np.log(x + self.shift)
        return x

    def inverse_power(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.method is TransformMethod.BOXCOX_MINMAX:
            return special.inv_boxcox(y, self.boxcox_lambda) - self.shift
        if self.method is TransformMethod.LOG_MINMAX:
            return np.exp(y) - self.shift
        return y

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Map raw values to the unit interval (unclamped)."""
        return (self.power(x) - self.minmax_min) / self.minmax_range

    def inverse(self, u: np.ndarray) -> np.ndarray:
        return self.inverse_power(np.asarray(u, dtype=np.float64) * self.minmax_range + self.minmax_min)

    def bin(self, x: np.ndarray) -> np.ndarray:
        """Decile class index; a value on a cut point goes to the higher bin."""
        return np.searchsorted(np.asarray(self.decile_cuts), np.asarray(x, dtype=np.float64), side='right')

    def representative(self, k: np.ndarray) -> np.ndarray:
        """Bin midpoint for decile class k."""
        edges = np.concatenate([[self.data_min], self.decile_cuts, [self.data_max]])
        k = np.asarray(k, dtype=np.int64)
        return (edges[k] + edges[k + 1]) / 2.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'variable': self.variable,
            'method': self.method.value,
            'boxcox_lambda': self.boxcox_lambda,
            'shift': self.shift,
            'minmax_min': self.minmax_min,
            'minmax_range': self.minmax_range,
            'decile_cuts': list(self.decile_cuts),
            'data_min': self.data_min,
            'data_max': self.data_max,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FittedTransform':
        return cls(
            variable=data['variable'],
            method=TransformMethod(data['method']),
            boxcox_lambda=data.get('boxcox_lambda'),
            shift=float(data.get('shift', 0.0)),
            minmax_min=float(data.get('minmax_min', 0.0)),
            minmax_range=float(data.get('minmax_range', 1.0)),
            decile_cuts=tuple(float(c) for c in data.get('decile_cuts', ())),
            data_min=float(data.get('data_min', 0.0)),
            data_max=float(data.get('data_max', 0.0)),
        )


def _finite(values) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64).ravel()
    return x[np.isfinite(x)]


def fit_boxcox_lambda(x: np.ndarray) -> float:
    """Lambda maximising the Box-Cox log-likelihood on the bounded search range."""
    result = optimize.minimize_scalar(
        lambda lmb: -stats.boxcox_llf(lmb, x),
        bounds=BOXCOX_LAMBDA_BOUNDS,
        method='bounded',
        options={'xatol': BOXCOX_LAMBDA_TOL},
    )
    return float(result.x)


def fit_transform(values, method: TransformMethod, variable: str = '', allow_shift: bool = True) -> FittedTransform:
    """Fit a power + min-max transform (or deciles) to one numeric column."""
    if method is TransformMethod.DECILE_TO_CATEGORICAL:
        return fit_deciles(values, variable)
    if method is TransformMethod.NONE:
        raise TransformError(f"no transform to fit for '{variable}'")

    x = _finite(values)
    if np.unique(x).size < 2:
        raise TransformError(f"degenerate column '{variable}': fewer than 2 distinct finite values")

    shift = 0.0
    if method in POWER_METHODS and x.min() <= 0:
        if not allow_shift:
            raise TransformError(f"nonpositive values in '{variable}' for {method.value} without a shift")
        shift = POSITIVITY_EPS - float(x.min())

    lmb = fit_boxcox_lambda(x + shift) if method is TransformMethod.BOXCOX_MINMAX else None
    fitted = FittedTransform(variable=variable, method=method, boxcox_lambda=lmb, shift=shift,
                             data_min=float(x.min()), data_max=float(x.max()))

    y = fitted.power(x)
    y_min, y_range = float(y.min()), float(y.max() - y.min())
    if not np.isfinite(y_range) or y_range <= 0:
        raise TransformError(f"degenerate column '{variable}': transformed range is {y_range}")

    logger.debug(f"Fitted {method.value} for '{variable}' (lambda={lmb}, shift={shift})")
    return replace(fitted, minmax_min=y_min, minmax_range=y_range)


def fit_deciles(values, variable: str = '') -> FittedTransform:
    """Nine cut points at the empirical 0.1..0.9 quantiles."""
    x = _finite(values)
    if np.unique(x).size < DECILE_COUNT:
        raise TransformError(f"'{variable}' needs at least {DECILE_COUNT} distinct values for deciles")

    cuts = np.quantile(x, np.arange(1, DECILE_COUNT) / DECILE_COUNT)
    if np.any(np.diff(cuts) <= 0):
        raise TransformError(f"decile cuts of '{variable}' are not strictly ascending")

    return FittedTransform(
        variable=variable,
        method=TransformMethod.DECILE_TO_CATEGORICAL,
        decile_cuts=tuple(float(c) for c in cuts),
        data_min=float(x.min()),
        data_max=float(x.max()),
    )


def fit_transforms(panel: Panel) -> Dict[str, 'FittedTransform']:
    """Fit the declared transform of every numeric variable of a panel."""
    transforms = {}
    for var in panel.schema.variables:
        if var.is_numeric:
            transforms[var.name] = fit_transform(panel.column(var.name), var.transform, var.name)
    logger.info(f"Fitted {len(transforms)} numeric transform(s)")
    return transforms


def _as_decile_categorical(var: VariableSpec) -> VariableSpec:
    return replace(var, kind=VariableKind.CATEGORICAL, class_labels=DECILE_LABELS, transform=TransformMethod.NONE)


def fitted_schema(schema: DatasetSchema, transforms: Dict[str, FittedTransform]) -> DatasetSchema:
    """Rewrite decile variables into 10-class categoricals."""
    variables = []
    for var in schema.variables:
        fitted = transforms.get(var.name)
        if var.is_numeric and fitted is not None and fitted.is_decile:
            var = _as_decile_categorical(var)
        variables.append(var)
    return schema.with_variables(variables)


def training_schema(schema: DatasetSchema) -> DatasetSchema:
    """The schema the networks see for a declared schema, before any fitting."""
    return schema.with_variables(
        _as_decile_categorical(var) if var.transform is TransformMethod.DECILE_TO_CATEGORICAL else var
        for var in schema.variables
    )


def discretize_panel(panel: Panel, transforms: Dict[str, FittedTransform]) -> Panel:
    """Bin decile variables of a declared-schema panel into class indices."""
    target = fitted_schema(panel.schema, transforms)
    if target == panel.schema:
        return panel
    values = np.array(panel.values)
    for v, (before, after) in enumerate(zip(panel.schema.variables, target.variables)):
        if before.kind != after.kind:
            cells = values[..., v]
            observed = ~np.isnan(cells)
            cells[observed] = transforms[before.name].bin(cells[observed])
    return Panel(target, panel.patient_ids, values, panel.lengths)


@dataclass(frozen=True)
class TransformSet:
    """Everything generation needs to decode: declared schema plus fitted transforms."""
    declared_schema: DatasetSchema
    transforms: Dict[str, FittedTransform] = field(default_factory=dict)

    @property
    def schema(self) -> DatasetSchema:
        return fitted_schema(self.declared_schema, self.transforms)

    @property
    def schema_hash(self) -> str:
        return schema_hash(self.schema)


def save_transforms(path: str, transform_set: TransformSet):
    payload = {
        'format_version': FORMAT_VERSION,
        'schema_hash': transform_set.schema_hash,
        'declared_schema': transform_set.declared_schema.to_dict(),
        'transforms': [t.to_dict() for t in transform_set.transforms.values()],
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2)
    logger.info(f"Transforms saved to {path}")


def load_transforms(path: str) -> TransformSet:
    with open(path, 'r', encoding='utf-8') as f:
        payload = json.load(f)
    transforms = {item['variable']: FittedTransform.from_dict(item) for item in payload['transforms']}
    transform_set = TransformSet(DatasetSchema.from_dict(payload['declared_schema']), transforms)
    if transform_set.schema_hash != payload['schema_hash']:
        raise TransformError(f"transforms file {path} is inconsistent with its schema hash")
    return transform_set


@dataclass(frozen=True, eq=False)
class EncodedTensor:
    """Fully numeric (N, T, O) representation; padded timesteps are zero."""
    schema: DatasetSchema
    data: np.ndarray
    lengths: np.ndarray
    patient_ids: Tuple[str, ...] = ()
    clamp_report: Dict[str, int] = field(default_factory=dict)

    @property
    def layout(self) -> List[Segment]:
        return self.schema.activation_layout()

    @property
    def n_patients(self) -> int:
        return self.data.shape[0]


def encode_panel(panel: Panel, transforms: Dict[str, FittedTransform]) -> EncodedTensor:
    """Transform numerics to [0, 1] and one-hot encode class cells."""
    panel = discretize_panel(panel, transforms)
    schema = panel.schema
    mask = panel.mask
    data = np.zeros((panel.n_patients, schema.sequence_length, schema.encoded_width))
    clamp_report = {}

    for v, (var, seg) in enumerate(zip(schema.variables, schema.activation_layout())):
        cells = panel.values[..., v]
        if np.isnan(cells[mask]).any():
            raise PanelError(f"missing values in '{var.name}'; forward fill before encoding")

        if seg.activation is ActivationKind.SIGMOID:
            if var.name not in transforms:
                raise TransformError(f"no fitted transform for numeric '{var.name}'")
            u = transforms[var.name].forward(cells[mask])
            clamped = int(np.count_nonzero((u < 0.0) | (u > 1.0)))
            if clamped:
                clamp_report[var.name] = clamped
            data[..., seg.start][mask] = np.clip(u, 0.0, 1.0)
        else:
            onehot = np.eye(seg.length)[cells[mask].astype(np.int64)]
            block = data[..., seg.start:seg.stop]
            block[mask] = onehot

    if clamp_report:
        logger.warning(f"Clamped out-of-range values while encoding: {clamp_report}")
    return EncodedTensor(schema, data, np.array(panel.lengths), panel.patient_ids, clamp_report)


def decode_panel(tensor: EncodedTensor, transforms: Dict[str, FittedTransform]) -> Panel:
    """Back-transform numerics and take the most probable class of each block."""
    schema = tensor.schema
    N, T = tensor.data.shape[:2]
    values = np.full((N, T, schema.n_variables), np.nan)

    for v, seg in enumerate(tensor.layout):
        if seg.activation is ActivationKind.SIGMOID:
            u = np.clip(tensor.data[..., seg.start], 0.0, 1.0)
            values[..., v] = transforms[seg.variable].inverse(u)
        else:
            # argmax returns the lowest index on ties
            values[..., v] = np.argmax(tensor.data[..., seg.start:seg.stop], axis=-1)

    patient_ids = tensor.patient_ids or tuple(str(i + 1) for i in range(N))
    return Panel(schema, patient_ids, values, tensor.lengths)


def save_encoded(path: str, tensor: EncodedTensor):
    payload = {
        'format_version': FORMAT_VERSION,
        'schema_hash': schema_hash(tensor.schema),
        'schema': tensor.schema.to_dict(),
        'data': np.ascontiguousarray(tensor.data),
        'lengths': np.asarray(tensor.lengths),
        'patient_ids': list(tensor.patient_ids),
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        pickle.dump(payload, f, protocol=pickle.HIGHEST_PROTOCOL)
    logger.info(f"Encoded tensor {tensor.data.shape} saved to {path}")


def load_encoded(path: str) -> EncodedTensor:
    with open(path, 'rb') as f:
        payload = pickle.load(f)
    schema = DatasetSchema.from_dict(payload['schema'])
    if schema_hash(schema) != payload['schema_hash']:
        raise TransformError(f"encoded file {path} is inconsistent with its schema hash")
    return EncodedTensor(schema, payload['data'], payload['lengths'], tuple(payload['patient_ids']))
