"""Shared fixtures for the synthgym test suite."""

import os

os.environ.setdefault('SYNTHGYM_LOG_FILE', '')

import numpy as np
import pytest

from synthgym.core.schema import DatasetSchema, Panel, VariableSpec
from synthgym.utils.constants import TransformMethod, VariableKind

HYPOTENSION_SCHEMA = os.path.join(os.path.dirname(__file__), '..', 'schemas', 'hypotension.yaml')
TOY_SCHEMA = os.path.join(os.path.dirname(__file__), '..', 'schemas', 'toy.yaml')


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance experiment (set SYNTHGYM_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if os.getenv('SYNTHGYM_RUN_SLOW') == '1':
        return
    skip_slow = pytest.mark.skip(reason="set SYNTHGYM_RUN_SLOW=1 to run")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def numeric(name, transform=TransformMethod.MINMAX_ONLY, **kwargs):
    return VariableSpec(name, VariableKind.NUMERIC, transform=transform, **kwargs)


def binary(name, **kwargs):
    return VariableSpec(name, VariableKind.BINARY, class_labels=('False', 'True'), **kwargs)


def categorical(name, labels, **kwargs):
    return VariableSpec(name, VariableKind.CATEGORICAL, class_labels=tuple(labels), **kwargs)


def make_schema(variables, T=4, latent_dim=3, hidden_dim=4):
    return DatasetSchema(tuple(variables), sequence_length=T, latent_dim=latent_dim, hidden_dim=hidden_dim)


def make_panel(schema, values, lengths=None, ids=None):
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if lengths is None:
        lengths = np.full(n, schema.sequence_length)
    if ids is None:
        ids = tuple(f"p{i}" for i in range(n))
    return Panel(schema, ids, values, lengths)


@pytest.fixture
def mixed_schema():
    """One numeric, one binary and one 3-class categorical variable over 4 steps."""
    return make_schema([numeric('hr'), binary('vent'), categorical('stage', ['a', 'b', 'c'])])


@pytest.fixture
def mixed_panel(mixed_schema):
    rng = np.random.default_rng(0)
    n, T = 6, mixed_schema.sequence_length
    values = np.stack([
        rng.normal(80.0, 10.0, size=(n, T)),
        rng.integers(0, 2, size=(n, T)),
        rng.integers(0, 3, size=(n, T)),
    ], axis=-1)
    return make_panel(mixed_schema, values, lengths=[4, 4, 3, 2, 4, 1])


@pytest.fixture
def toy_real_panel():
    """500 patients x 10 steps: two AR(1) series correlated through a shared shock, and a 30% flag."""
    from synthgym.core.schema import load_schema

    schema = load_schema(TOY_SCHEMA)
    rng = np.random.default_rng(2024)
    n, T = 500, schema.sequence_length
    shared = rng.normal(size=(n, T))
    x1 = np.zeros((n, T))
    x2 = np.zeros((n, T))
    for t in range(T):
        prev1 = x1[:, t - 1] if t else 0.0
        prev2 = x2[:, t - 1] if t else 0.0
        x1[:, t] = 0.7 * prev1 + shared[:, t] + 0.5 * rng.normal(size=n)
        x2[:, t] = 0.7 * prev2 + shared[:, t] + 0.5 * rng.normal(size=n)
    flag = (rng.random(size=(n, T)) < 0.3).astype(np.float64)
    return make_panel(schema, np.stack([x1, x2, flag], axis=-1))
