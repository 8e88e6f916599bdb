"""
Utility functions for creating test cases.
"""
import asyncio
import datetime as dt
import io
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from pvyield import IntradayLog, Pipeline, PvSystemMeta, RegisterEntry
from pvyield.synth import SynthDataset

DAY = dt.date(2016, 6, 1)
EPOCH_DAY = int(dt.datetime(2016, 6, 1, tzinfo=dt.timezone.utc).timestamp())


def make_meta(system_id: str = 'S1', pc4: str = '1234', size: float = 4.0, inverter: float = 4.0,
              orientation=180, tilt: float = 35, **kwargs) -> PvSystemMeta:
    return PvSystemMeta(system_id=system_id, pc4=pc4, system_size=size, inverter_size=inverter,
                        orientation=orientation, tilt=tilt, install_date=kwargs.pop('install_date', '2015-01-01'),
                        **kwargs)


def make_log(power: Sequence[float], minutes: Sequence[float] = None, cum: Sequence[float] = None,
             system_id: str = 'S1', day: dt.date = DAY) -> IntradayLog:
    """
    A system-day of samples starting at 10:00 UTC, five minutes apart unless minutes are given. The cumulative
    energy defaults to the left-rectangle integral of power.
    """
    minutes = np.arange(len(power)) * 5 if minutes is None else np.asarray(minutes, dtype=float)
    stamps = (EPOCH_DAY + 36000 + np.asarray(minutes) * 60).astype(np.int64)
    power = np.asarray(power, dtype=float)
    if cum is None:
        cum = np.concatenate([[0.0], np.cumsum(power[:-1] * np.diff(stamps) / 3600)]) if len(power) else []
    return IntradayLog(system_id=system_id, date=day, timestamps=stamps, power=power,
                       cum_energy=np.asarray(cum, dtype=float))


def make_entry(entry_id: str = 'R1', capacity: float = 4.0, install_date='2015-01-01', pc4: str = '1234',
               municipality: str = 'GM0001') -> RegisterEntry:
    return RegisterEntry(entry_id=entry_id, pc4=pc4, capacity=capacity, install_date=install_date,
                         municipality_code=municipality)


def write_csv(path: Path, header: str, *rows: str) -> Path:
    path.write_text('\n'.join([header, *rows]) + '\n')
    return path


def write_dataset(dataset: SynthDataset, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for name, data in dataset.csv_files().items():
        (directory / name).write_bytes(data)
    return directory


def read_output(pipeline: Pipeline, name: str, **kwargs) -> pd.DataFrame:
    return pd.read_csv(io.BytesIO(asyncio.run(pipeline.engine.load(name))), **kwargs)


def run_pipeline(config, *stages) -> Pipeline:
    pipeline = Pipeline(config)
    results = asyncio.run(pipeline(*stages))
    failed = [r for r in results if not r.status]
    assert not failed, failed[0].error
    return pipeline
