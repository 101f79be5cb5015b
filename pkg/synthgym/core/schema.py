"""Dataset schema, derived dimensions, and the panel container."""

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from ..utils.constants import (
    ActivationKind,
    DEFAULT_EMBED_DIM_BINARY,
    DEFAULT_EMBED_DIM_CATEGORICAL,
    DEFAULT_HIDDEN_DIM,
    DEFAULT_LATENT_DIM,
    MEASUREMENT_SUFFIX,
    TransformMethod,
    VariableKind,
)
from ..utils.errors import PanelError, SchemaError
from ..utils.logging_config import logger


@dataclass(frozen=True)
class VariableSpec:
    """One declared variable of a dataset."""
    name: str
    kind: VariableKind
    class_labels: Tuple[str, ...] = ()
    transform: TransformMethod = TransformMethod.NONE
    unit: str = ""
    is_quasi_identifier: bool = False
    is_measurement_flag: bool = False
    measures: Tuple[str, ...] = ()

    @property
    def class_count(self) -> int:
        return len(self.class_labels)

    @property
    def is_numeric(self) -> bool:
        return self.kind is VariableKind.NUMERIC

    @property
    def measured_variables(self) -> Tuple[str, ...]:
        """Names this measurement flag covers."""
        if self.measures:
            return self.measures
        if self.name.endswith(MEASUREMENT_SUFFIX):
            return (self.name[: -len(MEASUREMENT_SUFFIX)],)
        return ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'kind': self.kind.value,
            'class_labels': list(self.class_labels),
            'transform': self.transform.value,
            'unit': self.unit,
            'is_quasi_identifier': self.is_quasi_identifier,
            'is_measurement_flag': self.is_measurement_flag,
            'measures': list(self.measures),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'VariableSpec':
        kind = VariableKind(str(data['kind']).lower())
        default_transform = TransformMethod.MINMAX_ONLY if kind is VariableKind.NUMERIC else TransformMethod.NONE
        return cls(
            name=str(data['name']),
            kind=kind,
            class_labels=tuple(str(label) for label in data.get('class_labels') or ()),
            transform=TransformMethod(str(data.get('transform', default_transform.value)).lower()),
            unit=str(data.get('unit', '')),
            is_quasi_identifier=bool(data.get('is_quasi_identifier', False)),
            is_measurement_flag=bool(data.get('is_measurement_flag', False)),
            measures=tuple(str(name) for name in data.get('measures') or ()),
        )


@dataclass(frozen=True)
class Segment:
    """A contiguous slice of the encoded width owned by one variable."""
    variable: str
    activation: ActivationKind
    start: int
    length: int

    @property
    def stop(self) -> int:
        return self.start + self.length


@dataclass(frozen=True)
class DatasetSchema:
    """Ordered variable declarations plus the network dimensions."""
    variables: Tuple[VariableSpec, ...]
    sequence_length: int
    latent_dim: int = DEFAULT_LATENT_DIM
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    embed_dim_binary: int = DEFAULT_EMBED_DIM_BINARY
    embed_dim_categorical: int = DEFAULT_EMBED_DIM_CATEGORICAL

    def __post_init__(self):
        object.__setattr__(self, 'variables', tuple(self.variables))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(var.name for var in self.variables)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError([f"unknown variable '{name}'"]) from None

    def variable(self, name: str) -> VariableSpec:
        return self.variables[self.index(name)]

    @property
    def encoded_width(self) -> int:
        return encoded_width(self)

    @property
    def embedded_width(self) -> int:
        return embedded_width(self)

    def embed_dim(self, var: VariableSpec) -> int:
        if var.kind is VariableKind.BINARY:
            return self.embed_dim_binary
        if var.kind is VariableKind.CATEGORICAL:
            return self.embed_dim_categorical
        return 1

    def activation_layout(self) -> List[Segment]:
        """Segments of the encoded width in declaration order."""
        segments = []
        start = 0
        for var in self.variables:
            if var.is_numeric:
                segments.append(Segment(var.name, ActivationKind.SIGMOID, start, 1))
                start += 1
            else:
                segments.append(Segment(var.name, ActivationKind.SOFTMAX, start, var.class_count))
                start += var.class_count
        return segments

    def with_variables(self, variables: Iterable[VariableSpec]) -> 'DatasetSchema':
        return replace(self, variables=tuple(variables))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'sequence_length': self.sequence_length,
            'latent_dim': self.latent_dim,
            'hidden_dim': self.hidden_dim,
            'embed_dim_binary': self.embed_dim_binary,
            'embed_dim_categorical': self.embed_dim_categorical,
            'variables': [var.to_dict() for var in self.variables],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], validate: bool = True) -> 'DatasetSchema':
        schema = cls(
            variables=tuple(VariableSpec.from_dict(item) for item in data.get('variables') or ()),
            sequence_length=int(data['sequence_length']),
            latent_dim=int(data.get('latent_dim', DEFAULT_LATENT_DIM)),
            hidden_dim=int(data.get('hidden_dim', DEFAULT_HIDDEN_DIM)),
            embed_dim_binary=int(data.get('embed_dim_binary', DEFAULT_EMBED_DIM_BINARY)),
            embed_dim_categorical=int(data.get('embed_dim_categorical', DEFAULT_EMBED_DIM_CATEGORICAL)),
        )
        if validate:
            violations = validate_schema(schema)
            if violations:
                raise SchemaError(violations)
        return schema


def validate_schema(schema: DatasetSchema) -> List[str]:
    """Return every invariant violation of the schema; empty means ok."""
    violations = []
    if not schema.variables:
        violations.append("no variables declared")

    for attr in ('sequence_length', 'latent_dim', 'hidden_dim', 'embed_dim_binary', 'embed_dim_categorical'):
        value = getattr(schema, attr)
        if not isinstance(value, int) or value <= 0:
            violations.append(f"nonpositive dimension {attr}={value}")

    seen = set()
    for var in schema.variables:
        if var.name in seen:
            violations.append(f"duplicate variable name '{var.name}'")
        seen.add(var.name)

        if var.kind is VariableKind.BINARY and var.class_count != 2:
            violations.append(f"class count of binary '{var.name}' is {var.class_count}, expected 2")
        elif var.kind is VariableKind.CATEGORICAL and var.class_count < 2:
            violations.append(f"class count of categorical '{var.name}' is {var.class_count}, expected >= 2")
        elif var.kind is VariableKind.NUMERIC and var.class_count != 0:
            violations.append(f"class count of numeric '{var.name}' is {var.class_count}, expected 0")

        if len(set(var.class_labels)) != var.class_count:
            violations.append(f"duplicate class labels in '{var.name}'")

        if var.is_numeric and var.transform is TransformMethod.NONE:
            violations.append(f"numeric '{var.name}' needs a transform")
        if not var.is_numeric and var.transform is not TransformMethod.NONE:
            violations.append(f"transform {var.transform.value} is only valid for numeric variables ('{var.name}')")

        if var.is_measurement_flag and var.kind is not VariableKind.BINARY:
            violations.append(f"measurement flag '{var.name}' must be binary")

    names = set(schema.names)
    for var in schema.variables:
        for measured in var.measures:
            if measured not in names:
                violations.append(f"flag '{var.name}' measures unknown variable '{measured}'")
    return violations


def encoded_width(schema: DatasetSchema) -> int:
    """Width of the one-hot encoded feature vector."""
    return sum(1 if var.is_numeric else var.class_count for var in schema.variables)


def embedded_width(schema: DatasetSchema) -> int:
    """Width of the feature vector after soft embedding."""
    return sum(schema.embed_dim(var) for var in schema.variables)


def schema_hash(schema: DatasetSchema) -> str:
    """SHA-256 over a canonical JSON rendering of the schema."""
    canonical = json.dumps(schema.to_dict(), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def load_schema(path: str) -> DatasetSchema:
    """Load and validate a schema from a YAML file."""
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f)
    schema = DatasetSchema.from_dict(data)
    logger.info(f"Schema loaded from {path}: {schema.n_variables} variables, T={schema.sequence_length}")
    return schema


def measurement_companion(schema: DatasetSchema, name: str) -> Optional[VariableSpec]:
    """Find the binary flag variable recording when `name` was measured."""
    for var in schema.variables:
        if var.is_measurement_flag and name in var.measured_variables:
            return var
    return None


@dataclass(frozen=True, eq=False)
class Panel:
    """Patients x timesteps x variables, real or synthetic.

    Cells are float64; class cells hold integer class indices. Missing cells
    inside a record and padding beyond a patient's length are NaN.
    """
    schema: DatasetSchema
    patient_ids: Tuple[str, ...]
    values: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        T, V = self.schema.sequence_length, self.schema.n_variables
        ids = tuple(str(pid) for pid in self.patient_ids)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.size == 0:
            values = values.reshape(len(ids), T, V)
        lengths = np.asarray(self.lengths, dtype=np.int64).copy()

        if values.shape != (len(ids), T, V):
            raise PanelError(f"panel values shape {values.shape} does not match ({len(ids)}, {T}, {V})")
        if lengths.shape != (len(ids),):
            raise PanelError(f"expected {len(ids)} lengths, got {lengths.shape}")
        if len(lengths) and (lengths.min() < 1 or lengths.max() > T):
            raise PanelError(f"patient lengths must lie in [1, {T}]")

        values[~valid_mask(lengths, T)] = np.nan
        for v, var in enumerate(self.schema.variables):
            if var.is_numeric:
                continue
            cells = values[..., v]
            observed = cells[~np.isnan(cells)]
            if observed.size and (np.any(observed != np.floor(observed)) or observed.min() < 0
                                  or observed.max() >= var.class_count):
                raise PanelError(f"class index out of range for '{var.name}'")

        values.setflags(write=False)
        lengths.setflags(write=False)
        object.__setattr__(self, 'patient_ids', ids)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'lengths', lengths)

    @property
    def n_patients(self) -> int:
        return len(self.patient_ids)

    @property
    def mask(self) -> np.ndarray:
        return valid_mask(self.lengths, self.schema.sequence_length)

    def column(self, name: str) -> np.ndarray:
        """Pooled observed values of one variable over all valid cells."""
        cells = self.values[..., self.schema.index(name)][self.mask]
        return cells[~np.isnan(cells)]

    def series(self, patient: int, name: str) -> np.ndarray:
        return self.values[patient, : self.lengths[patient], self.schema.index(name)]

    def first_timestep(self) -> np.ndarray:
        return self.values[:, 0, :]

    def replace_values(self, values: np.ndarray, lengths: Optional[np.ndarray] = None,
                       schema: Optional[DatasetSchema] = None) -> 'Panel':
        return Panel(
            schema=schema or self.schema,
            patient_ids=self.patient_ids,
            values=values,
            lengths=self.lengths if lengths is None else lengths,
        )

    def select(self, indices: Sequence[int]) -> 'Panel':
        indices = list(indices)
        return Panel(
            schema=self.schema,
            patient_ids=tuple(self.patient_ids[i] for i in indices),
            values=self.values[indices],
            lengths=self.lengths[indices],
        )

    def equals(self, other: 'Panel') -> bool:
        return (
            self.schema == other.schema
            and self.patient_ids == other.patient_ids
            and np.array_equal(self.lengths, other.lengths)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def valid_mask(lengths: np.ndarray, sequence_length: int) -> np.ndarray:
    """Boolean (N, T) mask of cells inside each patient's record."""
    return np.arange(sequence_length)[None, :] < np.asarray(lengths)[:, None]
