import numpy as np
import pandas as pd
import pytest

from synthgym.validation.density import (
    class_shares,
    density_export,
    describe_panel,
    save_stage1,
    stage1_run,
)
from synthgym.utils.constants import KDE_GRID_POINTS
from synthgym.utils.errors import EmptyDatasetError

from conftest import binary, numeric


def test_numeric_density_on_shared_grid():
    rng = np.random.default_rng(1)
    table = density_export(rng.normal(size=300), rng.normal(1.0, 1.0, size=200), numeric('x'))
    assert table.grid.shape == (KDE_GRID_POINTS,)
    assert table.real.shape == table.synthetic.shape == table.grid.shape
    step = table.grid[1] - table.grid[0]
    assert table.real.sum() * step == pytest.approx(1.0, abs=0.05)
    assert table.point_mass == []


def test_constant_column_is_a_point_mass():
    table = density_export(np.full(10, 3.0), np.array([1.0, 2.0, 3.0, 4.0]), numeric('x'))
    assert table.point_mass == ['real']
    assert table.real.sum() == 1.0
    assert table.grid[int(np.argmax(table.real))] == pytest.approx(3.0, abs=table.grid[1] - table.grid[0])


def test_class_shares_in_percent():
    shares = class_shares(np.array([0.0, 1.0, 1.0, 1.0]), ('False', 'True'))
    assert shares == {'False': 25.0, 'True': 75.0}


def test_class_variable_gets_shares_only():
    table = density_export(np.array([0.0, 1.0]), np.array([1.0, 1.0]), binary('b'))
    assert table.grid is None
    assert table.shares['synthetic'] == {'False': 0.0, 'True': 100.0}


def test_empty_column_is_rejected():
    with pytest.raises(EmptyDatasetError):
        density_export(np.array([]), np.array([1.0]), numeric('x'))


def test_describe_panel(mixed_panel):
    frame = describe_panel(mixed_panel)
    hr = frame[frame.variable == 'hr'].set_index('statistic')['value']
    assert hr['median'] == pytest.approx(np.median(mixed_panel.column('hr')))
    vent = frame[frame.variable == 'vent']
    assert vent['value'].sum() == pytest.approx(100.0)


def test_stage1_outputs(tmp_path, mixed_panel):
    tables = stage1_run(mixed_panel, mixed_panel)
    assert [t.variable for t in tables] == ['hr', 'vent', 'stage']
    save_stage1(str(tmp_path), tables, mixed_panel, mixed_panel)
    densities = pd.read_csv(tmp_path / 'densities.csv')
    assert set(densities.source) == {'real', 'synthetic'}
    assert len(densities) == 2 * KDE_GRID_POINTS
    shares = pd.read_csv(tmp_path / 'class_shares.csv')
    assert set(shares.variable) == {'vent', 'stage'}
    assert (tmp_path / 'describe_real.csv').exists()
    assert (tmp_path / 'describe_synthetic.csv').exists()
