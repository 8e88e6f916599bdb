"""
This module sets up the test environment.
All fixtures are defined here and can be used in any test file.
"""
import datetime as dt

from pytest import fixture

from pvyield import SynthConfig, generate
from pvyield.pipeline import RUN_ALL

from .utils import run_pipeline, write_dataset

SMALL = SynthConfig(seed=3, n_systems=60, n_register=400, grid_rows=6, grid_cols=6, n_pc4=40, n_days=6,
                    start_date=dt.date(2016, 6, 1))
CLEAN = SMALL.model_copy(update={'gap_rate': 0.0, 'missing_day_rate': 0.0, 'peak_rate': 0.0,
                                 'meter_error_rate': 0.0})
ORACLE = SynthConfig(seed=11, n_systems=150, n_register=1500, grid_rows=10, grid_cols=10, n_pc4=80, n_days=10,
                     start_date=dt.date(2016, 6, 1))


@fixture(scope='session')
def synth_dataset():
    """
    A small synthetic dataset with every defect kind.

    Returns:
        SynthDataset: The generated tables.
    """
    return generate(SMALL)


@fixture(scope='session')
def synth_dir(tmp_path_factory, synth_dataset):
    """
    The small synthetic dataset written as input files.

    Returns:
        Path: The input directory.
    """
    return write_dataset(synth_dataset, tmp_path_factory.mktemp('synth'))


@fixture(scope='session')
def clean_dataset():
    """The small dataset without injected defects."""
    return generate(CLEAN)


@fixture
def run_config(synth_dir, tmp_path):
    """A fast run configuration on the small dataset, writing to a fresh directory."""
    return {'input_dir': str(synth_dir), 'out': str(tmp_path / 'out'), 'realizations': 3, 'bootstrap': 20,
            'threads': 2, 'dy': 0.1, 'seed': 7}


@fixture(scope='session')
def oracle(tmp_path_factory):
    """
    Every stage run on a larger dataset whose register yields are known.

    Returns:
        tuple[SynthDataset, Pipeline]: The dataset and the pipeline holding its outputs in memory.
    """
    dataset = generate(ORACLE)
    path = write_dataset(dataset, tmp_path_factory.mktemp('oracle'))
    pipeline = run_pipeline({'input_dir': str(path), 'storage': 'memory', 'scenarios': [1, 2, 6],
                             'realizations': 5, 'bootstrap': 50, 'dy': 0.1, 'threads': 4, 'seed': 5}, *RUN_ALL)
    return dataset, pipeline


@fixture(scope='session')
def season_runs(tmp_path_factory):
    """
    Summer and winter runs of a fleet whose flat panels gain in summer, for scenarios 1 and 7.

    Returns:
        dict[str, Pipeline]: Pipelines keyed by season.
    """
    runs = {}
    for season, start in (('summer', dt.date(2016, 6, 18)), ('winter', dt.date(2016, 12, 10))):
        config = SynthConfig(seed=21, n_systems=150, n_register=1000, grid_rows=6, grid_cols=6, n_pc4=40,
                             n_days=4, start_date=start, tilt_season=0.4)
        path = write_dataset(generate(config), tmp_path_factory.mktemp(season))
        runs[season] = run_pipeline({'input_dir': str(path), 'storage': 'memory', 'scenarios': [1, 7],
                                     'realizations': 3, 'bootstrap': 30, 'dy': 0.05, 'threads': 4},
                                    'clean', 'grid', 'estimate', 'report')
    return runs


@fixture(scope='session')
def acceptance(tmp_path_factory):
    """
    The default synthetic dataset (200 systems, 5000 register entries, 60 winter days) estimated with the
    default bins.

    Returns:
        tuple[SynthDataset, Pipeline]: The dataset and the pipeline holding its outputs in memory.
    """
    dataset = generate(SynthConfig(seed=1))
    path = write_dataset(dataset, tmp_path_factory.mktemp('acceptance'))
    pipeline = run_pipeline({'input_dir': str(path), 'storage': 'memory', 'realizations': 20, 'bootstrap': 100,
                             'threads': 4, 'seed': 1}, 'clean', 'grid', 'estimate')
    return dataset, pipeline


@fixture(scope='session')
def full_year(tmp_path_factory):
    """
    A small fleet estimated over every day of 2016.

    Returns:
        Pipeline: The pipeline holding its outputs in memory.
    """
    config = SynthConfig(seed=13, n_systems=40, n_register=200, grid_rows=3, grid_cols=3, n_pc4=10,
                         municipality_rows=2, municipality_cols=2, start_date=dt.date(2016, 1, 1), n_days=366)
    path = write_dataset(generate(config), tmp_path_factory.mktemp('year'))
    return run_pipeline({'input_dir': str(path), 'storage': 'memory', 'realizations': 2, 'bootstrap': 20,
                         'max_iters_factor': 5, 'threads': 4, 'seed': 3}, 'clean', 'grid', 'estimate')
