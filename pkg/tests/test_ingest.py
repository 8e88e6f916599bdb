"""
Tests for the input loaders.

Functions:
    test_load_system_meta
    test_system_meta_rejects
    test_missing_input_file
    test_missing_columns
    test_load_register_rejects
    test_load_intraday_groups_system_days
    test_load_intraday_rejects_rows
    test_load_intraday_rejects_whole_day
    test_load_irradiance_duplicates
    test_load_cells_duplicates
    test_fractional_integers_are_rejected
    test_centroid_out_of_range
    test_offset_check_does_not_warn
    test_load_reference_irradiance
    test_rejects_csv
    test_synth_inputs_load
"""
import datetime as dt
import warnings

import pytest

from pvyield import MissingInputError, PvYieldError
from pvyield.ingest import (INTRADAY_COLUMNS, SYSTEM_COLUMNS, load_cells, load_centroids, load_intraday,
                            load_irradiance, load_reference_irradiance, load_register, load_system_meta, rejects_csv)

from . import synth_dataset, synth_dir
from .utils import write_csv

SYSTEM_HEADER = ','.join(SYSTEM_COLUMNS)
INTRADAY_HEADER = ','.join(INTRADAY_COLUMNS)


def test_load_system_meta(tmp_path):
    path = write_csv(tmp_path / 'systems.csv', SYSTEM_HEADER,
                     'S1,1234,52.1,5.1,4.0,3.6,250,16,S,35,2015-04-01',
                     'S2,0101,,,2.5,2.5,,,sw,20,2014-01-01',
                     'S3,5678,51.9,4.8,3.0,3.3,300,10,90,0,2016-02-29')
    loaded = load_system_meta(path)
    assert len(loaded) == 3 and loaded.rejects == []
    s1, s2, s3 = loaded.items
    assert s1.orientation == 180 and s1.lat_lon == (52.1, 5.1) and s1.epsilon == 1
    assert s2.pc4 == '0101' and s2.orientation == 225 and s2.lat_lon is None and s2.epsilon == 0
    assert s3.orientation == 90 and s3.epsilon == -1 and s3.install_date == dt.date(2016, 2, 29)


def test_system_meta_rejects(tmp_path):
    path = write_csv(tmp_path / 'systems.csv', SYSTEM_HEADER,
                     'S1,1234,,,4.0,3.6,,,XX,35,2015-04-01',
                     'S2,1234,,,4.0,3.6,,,S,95,2015-04-01',
                     'S3,1234,52.0,,4.0,3.6,,,S,35,2015-04-01',
                     'S4,123,,,4.0,3.6,,,S,35,2015-04-01',
                     'S5,1234,,,0,3.6,,,S,35,2015-04-01',
                     'S6,1234,,,4.0,3.6,,,S,35,2015-04-01')
    loaded = load_system_meta(path)
    assert [m.system_id for m in loaded.items] == ['S6']
    assert [(r.row_no, r.reason) for r in loaded.rejects] == [
        (1, 'unknown orientation'), (2, 'tilt out of range'), (3, 'incomplete coordinates'),
        (4, 'pc4 must be 4 digits'), (5, 'system size must be positive')]
    assert len(loaded) + len(loaded.rejects) == loaded.n_rows


def test_missing_input_file(tmp_path):
    with pytest.raises(MissingInputError) as err:
        load_register(tmp_path / 'register.csv')
    assert 'register.csv' in str(err.value)


def test_missing_columns(tmp_path):
    path = write_csv(tmp_path / 'register.csv', 'entry_id,pc4', 'R1,1234')
    with pytest.raises(PvYieldError, match='capacity_kwp'):
        load_register(path)


def test_load_register_rejects(tmp_path):
    path = write_csv(tmp_path / 'register.csv', 'entry_id,pc4,capacity_kwp,install_date,municipality_code',
                     'R1,1234,4.5,2015-06-30,GM0363',
                     'R2,1234,0,2015-06-30,GM0363',
                     'R3,1234,3.0,2015-06-30,',
                     'R4,1234,abc,2015-06-30,GM0363')
    loaded = load_register(path)
    assert [e.entry_id for e in loaded.items] == ['R1']
    assert [r.reason for r in loaded.rejects] == ['capacity must be positive', 'municipality code missing',
                                                 'invalid number for capacity_kwp']


def test_load_intraday_groups_system_days(tmp_path):
    path = write_csv(tmp_path / 'intraday.csv', INTRADAY_HEADER,
                     'S2,2016-06-01T10:05:00+02:00,1.0,0.5',
                     'S1,2016-06-02T10:00:00Z,1.0,0.0',
                     'S2,2016-06-01T10:00:00+02:00,1.0,0.0',
                     'S1,2016-06-01T10:00:00Z,2.0,0.0')
    loaded = load_intraday(path)
    assert loaded.rejects == []
    assert [(log.system_id, log.date) for log in loaded.items] == [
        ('S1', dt.date(2016, 6, 1)), ('S1', dt.date(2016, 6, 2)), ('S2', dt.date(2016, 6, 1))]
    s2 = loaded.items[2]
    assert list(s2.timestamps) == sorted(s2.timestamps) and list(s2.cum_energy) == [0.0, 0.5]
    # 10:00 local at +02:00
    assert s2.timestamps[0] == int(dt.datetime(2016, 6, 1, 8, tzinfo=dt.timezone.utc).timestamp())


def test_load_intraday_rejects_rows(tmp_path):
    path = write_csv(tmp_path / 'intraday.csv', INTRADAY_HEADER,
                     'S1,2016-06-01T10:00:00,1.0,0.0',
                     'S1,2016-06-01T10:05:00Z,-1.0,0.0',
                     'S1,2016-06-01T10:10:00Z,x,0.0',
                     'S1,yesterday+01:00,1.0,0.0',
                     'S1,2016-06-01T10:15:00Z,1.0,0.1')
    loaded = load_intraday(path)
    assert [r.reason for r in loaded.rejects] == ['timestamp lacks UTC offset', 'negative power_kw',
                                                 'invalid number for power_kw', 'invalid timestamp']
    assert sum(len(log) for log in loaded.items) + len(loaded.rejects) == loaded.n_rows


def test_load_intraday_rejects_whole_day(tmp_path):
    path = write_csv(tmp_path / 'intraday.csv', INTRADAY_HEADER,
                     'S1,2016-06-01T10:00:00Z,1.0,0.0',
                     'S1,2016-06-01T10:00:00Z,1.0,0.0',
                     'S1,2016-06-01T10:05:00Z,1.0,0.1',
                     'S2,2016-06-01T10:00:00Z,1.0,0.5',
                     'S2,2016-06-01T10:05:00Z,1.0,0.4',
                     'S3,2016-06-01T10:00:00Z,1.0,0.0')
    loaded = load_intraday(path)
    assert [log.system_id for log in loaded.items] == ['S3']
    reasons = {r.row_no: r.reason for r in loaded.rejects}
    assert reasons == {1: 'duplicate timestamp', 2: 'duplicate timestamp', 3: 'duplicate timestamp',
                       4: 'cumulative energy decreases', 5: 'cumulative energy decreases'}


def test_load_irradiance_duplicates(tmp_path):
    path = write_csv(tmp_path / 'irradiance.csv', 'cell_id,timestamp,irradiance_kw_m2',
                     '2,2016-06-01T10:15:00Z,0.5',
                     '2,2016-06-01T10:00:00Z,0.4',
                     '2,2016-06-01T10:00:00Z,0.9',
                     '1,2016-06-01T10:00:00Z,-0.1')
    loaded = load_irradiance(path)
    assert [(r.row_no, r.reason) for r in loaded.rejects] == [(3, 'duplicate timestamp'),
                                                             (4, 'negative irradiance_kw_m2')]
    assert loaded.frame['irradiance'].tolist() == [0.4, 0.5]
    assert loaded.frame['date'].tolist() == [dt.date(2016, 6, 1)] * 2


def test_load_cells_duplicates(tmp_path):
    path = write_csv(tmp_path / 'cells.csv', 'cell_id,lat,lon', '1,52.0,5.0', '1,52.1,5.0', '2,52.2,5.0')
    loaded = load_cells(path)
    assert [c.cell_id for c in loaded.items] == [1, 2]
    assert loaded.rejects[0].reason == 'duplicate cell id'


def test_fractional_integers_are_rejected(tmp_path):
    cells = load_cells(write_csv(tmp_path / 'cells.csv', 'cell_id,lat,lon', '1.5,52.0,5.0', '2.0,52.1,5.0'))
    assert [c.cell_id for c in cells.items] == [2]
    assert [(r.row_no, r.reason) for r in cells.rejects] == [(1, 'invalid integer for cell_id')]
    systems = load_system_meta(write_csv(tmp_path / 'systems.csv', SYSTEM_HEADER,
                                         'S1,1234,,,4.0,3.6,250,12.7,S,35,2015-04-01',
                                         'S2,1234,,,4.0,3.6,250,16,S,35,2015-04-01'))
    assert [m.num_panels for m in systems.items] == [16]
    assert systems.rejects[0].reason == 'invalid integer for num_panels'


def test_centroid_out_of_range(tmp_path):
    path = write_csv(tmp_path / 'pc4_centroids.csv', 'pc4,lat,lon', '1000,91,5.0', '1001,52.0,5.0')
    loaded = load_centroids(path)
    assert [c.pc4 for c in loaded.items] == ['1001']
    assert loaded.rejects[0].reason == 'latitude out of range'


def test_offset_check_does_not_warn(tmp_path):
    path = write_csv(tmp_path / 'intraday.csv', INTRADAY_HEADER, 'S1,2016-06-01T10:00:00Z,1.0,0.0',
                     'S1,2016-06-01T12:05:00+02:00,1.0,0.1')
    with warnings.catch_warnings():
        warnings.simplefilter('error', UserWarning)
        loaded = load_intraday(path)
    assert loaded.rejects == []


def test_load_reference_irradiance(tmp_path):
    path = write_csv(tmp_path / 'reference_irradiance.csv', 'date,irradiance_kwh_m2',
                     '2016-06-01,5.5', '2016-06-02,-1', 'june,3')
    loaded = load_reference_irradiance(path)
    assert loaded.items == [(dt.date(2016, 6, 1), 5.5)]
    assert [r.reason for r in loaded.rejects] == ['negative irradiance', 'invalid date']


def test_rejects_csv(tmp_path):
    path = write_csv(tmp_path / 'cells.csv', 'cell_id,lat,lon', '1,52.0,5.0', '1,52.1,5.0')
    body = rejects_csv(load_cells(path)).decode()
    assert body.splitlines() == ['row_no,reason', '2,duplicate cell id']


def test_synth_inputs_load(synth_dir, synth_dataset):
    systems = load_system_meta(synth_dir / 'systems.csv')
    assert systems.rejects == [] and len(systems) == synth_dataset.config.n_systems
    intraday = load_intraday(synth_dir / 'intraday.csv')
    assert intraday.rejects == []
    assert sum(len(log) for log in intraday.items) == intraday.n_rows
