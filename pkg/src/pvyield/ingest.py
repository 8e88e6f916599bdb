"""
Input loaders. Every loader turns a delimited text file into typed values plus a reject list; nothing is
dropped silently and no statistics happen here.

Bulk inputs (intraday logs, quarter-hour irradiance) are validated column-wise with pandas; small tables
(systems, register, centroids, cells) row by row through the pydantic models.
"""
import io
import re
from logging import getLogger
from pathlib import Path
from typing import IO, Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .exceptions import MissingInputError, PvYieldError
from .structs import (IntradayLog, IrradianceCell, Loaded, Pc4Centroid, PvSystemMeta, RegisterEntry,
                      Reject)

logger = getLogger(__name__)
Source = Union[str, Path, IO]

SYSTEM_COLUMNS = ['system_id', 'pc4', 'lat', 'lon', 'system_size_kwp', 'inverter_size_kw', 'panel_power_w',
                  'num_panels', 'orientation', 'tilt_deg', 'install_date']
INTRADAY_COLUMNS = ['system_id', 'timestamp', 'power_kw', 'cum_energy_kwh']
REGISTER_COLUMNS = ['entry_id', 'pc4', 'capacity_kwp', 'install_date', 'municipality_code']
CENTROID_COLUMNS = ['pc4', 'lat', 'lon']
CELL_COLUMNS = ['cell_id', 'lat', 'lon']
IRRADIANCE_COLUMNS = ['cell_id', 'timestamp', 'irradiance_kw_m2']
REFERENCE_COLUMNS = ['date', 'irradiance_kwh_m2']

_OFFSET = re.compile(r'(?:Z|[+-]\d{2}:?\d{2})$')
_EPOCH = pd.Timestamp('1970-01-01', tz='UTC')


def _name(source: Source) -> str:
    return str(source) if isinstance(source, (str, Path)) else getattr(source, 'name', '<stream>')


def read_table(source: Source, columns: List[str]) -> pd.DataFrame:
    """
    Read a header-first delimited text file as strings.

    Raises:
        MissingInputError: The file does not exist or cannot be read.
        PvYieldError: Required columns are missing.
    """
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return pd.DataFrame({c: pd.Series(dtype=str) for c in columns})
    except (FileNotFoundError, IsADirectoryError, PermissionError) as err:
        raise MissingInputError(_name(source)) from err
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise PvYieldError(f'{_name(source)}: missing columns {", ".join(missing)}')
    return frame


def _reason(err: Exception) -> str:
    if isinstance(err, ValidationError):
        first = err.errors()[0]
        return first['msg'].removeprefix('Value error, ')
    return str(err)


def _number(value: str, field: str, cast: Callable = float, required: bool = True):
    value = value.strip()
    if not value:
        if required:
            raise ValueError(f'missing {field}')
        return None
    try:
        number = float(value)
    except ValueError:
        raise ValueError(f'invalid number for {field}') from None
    if cast is int:
        if not number.is_integer():
            raise ValueError(f'invalid integer for {field}')
        return int(number)
    return cast(number)


def _load_rows(source: Source, columns: List[str], build: Callable[[Dict[str, str]], object]) -> Loaded:
    frame = read_table(source, columns)
    result = Loaded(source=_name(source), n_rows=len(frame))
    for row_no, rec in enumerate(frame.to_dict('records'), start=1):
        try:
            result.items.append(build(rec))
        except (ValidationError, ValueError) as err:
            result.rejects.append(Reject(row_no=row_no, reason=_reason(err)))
    if result.rejects:
        logger.warning(f'{len(result.rejects)} of {result.n_rows} rows rejected from {result.source}')
    return result


def _system(rec: Dict[str, str]) -> PvSystemMeta:
    lat, lon = _number(rec['lat'], 'lat', required=False), _number(rec['lon'], 'lon', required=False)
    if (lat is None) != (lon is None):
        raise ValueError('incomplete coordinates')
    return PvSystemMeta(system_id=rec['system_id'].strip(), pc4=rec['pc4'],
                        lat_lon=(lat, lon) if lat is not None else None,
                        system_size=_number(rec['system_size_kwp'], 'system_size_kwp'),
                        inverter_size=_number(rec['inverter_size_kw'], 'inverter_size_kw'),
                        panel_power=_number(rec['panel_power_w'], 'panel_power_w', required=False),
                        num_panels=_number(rec['num_panels'], 'num_panels', cast=int, required=False),
                        orientation=rec['orientation'], tilt=_number(rec['tilt_deg'], 'tilt_deg'),
                        install_date=rec['install_date'].strip())


def load_system_meta(source: Source) -> Loaded:
    """Load systems.csv into PvSystemMeta values."""
    return _load_rows(source, SYSTEM_COLUMNS, _system)


def load_register(source: Source) -> Loaded:
    """Load register.csv into RegisterEntry values."""
    return _load_rows(source, REGISTER_COLUMNS, lambda rec: RegisterEntry(
        entry_id=rec['entry_id'].strip(), pc4=rec['pc4'], capacity=_number(rec['capacity_kwp'], 'capacity_kwp'),
        install_date=rec['install_date'].strip(), municipality_code=rec['municipality_code']))


def load_centroids(source: Source) -> Loaded:
    """Load pc4_centroids.csv into Pc4Centroid values."""
    return _load_rows(source, CENTROID_COLUMNS, lambda rec: Pc4Centroid(
        pc4=rec['pc4'], lat=_number(rec['lat'], 'lat'), lon=_number(rec['lon'], 'lon')))


def load_cells(source: Source) -> Loaded:
    """Load cells.csv into IrradianceCell values; duplicate cell ids are rejected."""
    seen = set()

    def build(rec):
        cell = IrradianceCell(cell_id=_number(rec['cell_id'], 'cell_id', cast=int),
                              lat=_number(rec['lat'], 'lat'), lon=_number(rec['lon'], 'lon'))
        if cell.cell_id in seen:
            raise ValueError('duplicate cell id')
        seen.add(cell.cell_id)
        return cell

    return _load_rows(source, CELL_COLUMNS, build)


def _timestamps(frame: pd.DataFrame, reasons: pd.Series) -> pd.DataFrame:
    """Parse ISO-8601 timestamps with explicit offsets into epoch seconds and the local calendar date."""
    stamp = frame['timestamp'].str.strip()
    has_offset = stamp.str.contains(_OFFSET)
    parsed = pd.to_datetime(stamp.where(has_offset), utc=True, format='ISO8601', errors='coerce')
    day = pd.to_datetime(stamp.str.slice(0, 10), format='%Y-%m-%d', errors='coerce')
    reasons[~has_offset & reasons.eq('')] = 'timestamp lacks UTC offset'
    reasons[(parsed.isna() | day.isna()) & reasons.eq('')] = 'invalid timestamp'
    frame['epoch'] = ((parsed - _EPOCH).dt.total_seconds().round()).astype('Int64')
    frame['date'] = day.dt.date
    return frame


def _numeric(frame: pd.DataFrame, column: str, reasons: pd.Series, non_negative=True) -> pd.Series:
    values = pd.to_numeric(frame[column].str.strip(), errors='coerce')
    reasons[values.isna() & reasons.eq('')] = f'invalid number for {column}'
    if non_negative:
        reasons[(values < 0) & reasons.eq('')] = f'negative {column}'
    return values


def _reject_list(reasons: pd.Series) -> List[Reject]:
    bad = reasons[reasons.ne('')]
    return [Reject(row_no=int(i) + 1, reason=r) for i, r in bad.items()]


def load_intraday(source: Source) -> Loaded:
    """
    Load intraday.csv into one IntradayLog per (system_id, local date), samples sorted by timestamp.
    A system-day with a repeated timestamp or a decreasing cumulative reading is rejected as a whole.
    """
    frame = read_table(source, INTRADAY_COLUMNS).reset_index(drop=True)
    result = Loaded(source=_name(source), n_rows=len(frame))
    if frame.empty:
        return result
    reasons = pd.Series('', index=frame.index, dtype=object)
    frame['system_id'] = frame['system_id'].str.strip()
    reasons[frame['system_id'].eq('')] = 'missing system_id'
    frame = _timestamps(frame, reasons)
    frame['power'] = _numeric(frame, 'power_kw', reasons)
    frame['cum'] = _numeric(frame, 'cum_energy_kwh', reasons)

    ok = reasons.eq('')
    good = frame[ok].sort_values(['system_id', 'date', 'epoch'], kind='stable')
    keys = ['system_id', 'date']
    dup = good.duplicated(keys + ['epoch'], keep=False)
    dup_days = good.loc[dup, keys].drop_duplicates()
    drop = good.groupby(keys, sort=False)['cum'].diff() < 0
    drop_days = good.loc[drop, keys].drop_duplicates()
    for days, reason in ((dup_days, 'duplicate timestamp'), (drop_days, 'cumulative energy decreases')):
        if days.empty:
            continue
        hit = good.set_index(keys).index.isin(days.set_index(keys).index)
        rows = good.index[hit]
        reasons[rows[reasons[rows].eq('')]] = reason
    good = good[reasons[good.index].eq('')]

    for (system_id, day), group in good.groupby(keys, sort=True):
        result.items.append(IntradayLog.model_construct(
            system_id=system_id, date=day, timestamps=group['epoch'].to_numpy(dtype=np.int64),
            power=group['power'].to_numpy(dtype=float), cum_energy=group['cum'].to_numpy(dtype=float)))
    result.rejects = _reject_list(reasons)
    if result.rejects:
        logger.warning(f'{len(result.rejects)} of {result.n_rows} rows rejected from {result.source}')
    logger.info(f'Loaded {len(result.items)} system-days from {result.source}')
    return result


class IrradianceFrame(Loaded):
    """Quarter-hour irradiance: a frame with columns cell_id, epoch, date, irradiance."""
    frame: Optional[pd.DataFrame] = None


def load_irradiance(source: Source) -> IrradianceFrame:
    """Load irradiance.csv. Rows with a negative irradiance or a duplicated (cell, timestamp) are rejected."""
    raw = read_table(source, IRRADIANCE_COLUMNS).reset_index(drop=True)
    result = IrradianceFrame(source=_name(source), n_rows=len(raw))
    reasons = pd.Series('', index=raw.index, dtype=object)
    cell = pd.to_numeric(raw['cell_id'].str.strip(), errors='coerce')
    reasons[cell.isna() | (cell % 1 != 0)] = 'invalid cell_id'
    raw = _timestamps(raw, reasons)
    raw['irradiance'] = _numeric(raw, 'irradiance_kw_m2', reasons)
    raw['cell_id'] = cell
    ok = reasons.eq('')
    dup = raw[ok].duplicated(['cell_id', 'epoch'], keep='first')
    reasons[dup.index[dup]] = 'duplicate timestamp'
    ok = reasons.eq('')
    frame = raw.loc[ok, ['cell_id', 'epoch', 'date', 'irradiance']].astype({'cell_id': np.int64, 'epoch': np.int64})
    result.frame = frame.sort_values(['cell_id', 'epoch'], kind='stable').reset_index(drop=True)
    result.rejects = _reject_list(reasons)
    if result.rejects:
        logger.warning(f'{len(result.rejects)} of {result.n_rows} rows rejected from {result.source}')
    return result


def load_reference_irradiance(source: Source) -> Loaded:
    """Load a single-station daily irradiance series as (date, kWh/m2) tuples."""
    def build(rec):
        day = pd.to_datetime(rec['date'].strip(), format='%Y-%m-%d', errors='coerce')
        if pd.isna(day):
            raise ValueError('invalid date')
        value = _number(rec['irradiance_kwh_m2'], 'irradiance_kwh_m2')
        if value < 0:
            raise ValueError('negative irradiance')
        return day.date(), value

    return _load_rows(source, REFERENCE_COLUMNS, build)


def rejects_csv(loaded: Loaded) -> bytes:
    """The `<input>.rejects.csv` body: row_no,reason."""
    buf = io.StringIO()
    pd.DataFrame([r.model_dump() for r in loaded.rejects], columns=['row_no', 'reason']).to_csv(buf, index=False)
    return buf.getvalue().encode()
