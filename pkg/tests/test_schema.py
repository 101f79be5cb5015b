import os

import numpy as np
import pytest

from synthgym.core.preprocess import training_schema
from synthgym.core.schema import (
    DatasetSchema,
    VariableSpec,
    embedded_width,
    encoded_width,
    load_schema,
    measurement_companion,
    schema_hash,
    validate_schema,
)
from synthgym.utils.constants import ActivationKind, TransformMethod, VariableKind
from synthgym.utils.errors import PanelError, SchemaError

from conftest import HYPOTENSION_SCHEMA, binary, categorical, make_panel, make_schema, numeric


def test_hypotension_dimensions():
    schema = load_schema(HYPOTENSION_SCHEMA)
    kinds = [v.kind for v in schema.variables]
    assert kinds.count(VariableKind.NUMERIC) == 9
    assert kinds.count(VariableKind.CATEGORICAL) == 4
    assert kinds.count(VariableKind.BINARY) == 7
    assert validate_schema(schema) == []
    assert encoded_width(schema) == 54
    assert embedded_width(schema) == 39
    assert schema.sequence_length == 48


@pytest.mark.parametrize("variables, expected", [
    ([numeric('a')], 1),
    ([binary('a'), binary('b')], 4),
])
def test_encoded_width_small(variables, expected):
    assert encoded_width(make_schema(variables)) == expected


@pytest.mark.parametrize("variables, expected", [
    ([categorical('c', 'xyz')], 4),
    ([numeric('a'), binary('b')], 3),
])
def test_embedded_width_small(variables, expected):
    assert embedded_width(make_schema(variables)) == expected


def test_binary_with_three_classes_is_rejected():
    schema = make_schema([VariableSpec('b', VariableKind.BINARY, class_labels=('x', 'y', 'z'))])
    violations = validate_schema(schema)
    assert any('class count' in v for v in violations)


def test_empty_variable_list_is_rejected():
    with pytest.raises(SchemaError) as err:
        DatasetSchema.from_dict({'sequence_length': 4, 'variables': []})
    assert any('no variables' in v for v in err.value.violations)


def test_duplicate_names_and_nonpositive_dims_are_all_reported():
    schema = make_schema([numeric('a'), numeric('a')], T=0)
    violations = validate_schema(schema)
    assert any('duplicate variable' in v for v in violations)
    assert any('sequence_length' in v for v in violations)


def test_numeric_without_transform_is_rejected():
    schema = make_schema([numeric('a', transform=TransformMethod.NONE)])
    assert any('needs a transform' in v for v in validate_schema(schema))


def test_activation_layout_follows_declaration_order(mixed_schema):
    layout = mixed_schema.activation_layout()
    assert [(s.variable, s.activation, s.start, s.length) for s in layout] == [
        ('hr', ActivationKind.SIGMOID, 0, 1),
        ('vent', ActivationKind.SOFTMAX, 1, 2),
        ('stage', ActivationKind.SOFTMAX, 3, 3),
    ]


def test_schema_hash_is_stable_and_sensitive(mixed_schema):
    same = DatasetSchema.from_dict(mixed_schema.to_dict())
    assert schema_hash(same) == schema_hash(mixed_schema)
    other = make_schema([numeric('hr'), binary('vent')])
    assert schema_hash(other) != schema_hash(mixed_schema)


def test_measurement_companion_by_suffix_and_by_list():
    schema = load_schema(HYPOTENSION_SCHEMA)
    assert measurement_companion(schema, 'Urine').name == 'Urine (M)'
    assert measurement_companion(schema, 'AST').name == 'ALT/AST (M)'
    assert measurement_companion(schema, 'Lactate').name == 'Lactic Acid (M)'
    assert measurement_companion(schema, 'MAP') is None


def test_panel_masks_padding(mixed_schema):
    values = np.ones((1, 4, 3))
    panel = make_panel(mixed_schema, values, lengths=[2])
    assert np.isnan(panel.values[0, 2:]).all()
    assert panel.column('hr').tolist() == [1.0, 1.0]


def test_panel_rejects_bad_lengths_and_class_indices(mixed_schema):
    with pytest.raises(PanelError):
        make_panel(mixed_schema, np.zeros((1, 4, 3)), lengths=[0])
    bad = np.zeros((1, 4, 3))
    bad[0, 0, 2] = 3
    with pytest.raises(PanelError, match='class index'):
        make_panel(mixed_schema, bad)


def test_panel_is_read_only(mixed_panel):
    with pytest.raises(ValueError):
        mixed_panel.values[0, 0, 0] = 1.0


SCHEMA_DIR = os.path.join(os.path.dirname(__file__), '..', 'schemas')


def test_sepsis_dimensions():
    declared = load_schema(os.path.join(SCHEMA_DIR, 'sepsis.yaml'))
    assert validate_schema(declared) == []
    assert declared.n_variables == 44
    assert declared.sequence_length == 20
    deciles = [v.name for v in declared.variables if v.transform is TransformMethod.DECILE_TO_CATEGORICAL]
    assert deciles == ['SpO2', 'Temp', 'PTT', 'PT', 'INR']
    assert [v.name for v in declared.variables if v.is_quasi_identifier] == ['Age', 'Gender']

    schema = training_schema(declared)
    kinds = [v.kind for v in schema.variables]
    assert kinds.count(VariableKind.NUMERIC) == 35
    assert kinds.count(VariableKind.BINARY) == 3
    assert kinds.count(VariableKind.CATEGORICAL) == 6
    # 35 numeric + 3 binary x 2 + GCS 13 + 5 deciles x 10
    assert encoded_width(schema) == 104
    assert embedded_width(schema) == 35 + 3 * 2 + 6 * 4


def test_hiv_dimensions():
    schema = load_schema(os.path.join(SCHEMA_DIR, 'hiv.yaml'))
    assert validate_schema(schema) == []
    assert training_schema(schema) == schema
    kinds = [v.kind for v in schema.variables]
    assert kinds.count(VariableKind.NUMERIC) == 3
    assert kinds.count(VariableKind.BINARY) == 5
    assert kinds.count(VariableKind.CATEGORICAL) == 5
    assert schema.sequence_length == 60
    # 3 numeric + 5 binary x 2 + 4 + 6 + 4 + 4 + 6 classes
    assert encoded_width(schema) == 37
    assert embedded_width(schema) == 3 + 5 * 2 + 5 * 4
    assert measurement_companion(schema, 'Rel CD4').name == 'CD4 (M)'
    assert measurement_companion(schema, 'VL').name == 'VL (M)'
    assert [v.name for v in schema.variables if v.is_quasi_identifier] == ['Gender', 'Ethnicity']
