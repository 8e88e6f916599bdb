"""
Gridded irradiance: quarter-hour samples are summed to daily kWh/m2 per cell, and PC4 centroids are matched
to their nearest grid cell.
"""
import datetime as dt
from logging import getLogger
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import NoIrradianceError
from .structs import DailyIrradianceField, IrradianceCell, Pc4Centroid, QuarterHourSample
from .util import great_circle_km

logger = getLogger(__name__)

QUARTER_HOUR = 0.25
_TIE_KM = 1e-9


def _aggregate(epochs: np.ndarray, values: np.ndarray) -> Tuple[float, int]:
    """Sum of value * interval-to-next-sample; the last sample holds for one quarter-hour."""
    hours = np.append(np.diff(epochs) / 3600.0, QUARTER_HOUR)
    widened = int(np.count_nonzero(hours > QUARTER_HOUR + 1e-6))
    return float(np.dot(values, hours)), widened


def aggregate_daily(samples: Sequence[QuarterHourSample]) -> Optional[Tuple[float, int]]:
    """
    Daily total for one cell-day.

    Args:
        samples: The cell-day's samples sorted by timestamp.

    Returns:
        (total kWh/m2, number of widened intervals), or None when the cell-day has no samples.
    """
    if not samples:
        return None
    epochs = np.array([s.timestamp.timestamp() for s in samples], dtype=float)
    values = np.array([s.irradiance for s in samples], dtype=float)
    return _aggregate(epochs, values)


def aggregate_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Vectorized aggregate_daily over every cell-day of a frame with columns cell_id, epoch, date, irradiance.

    Returns:
        DataFrame: date, cell_id, total_kwh_m2, n_missing sorted by date then cell.
    """
    if frame.empty:
        return pd.DataFrame(columns=['date', 'cell_id', 'total_kwh_m2', 'n_missing'])
    frame = frame.sort_values(['cell_id', 'date', 'epoch'], kind='stable')
    nxt = frame.groupby(['cell_id', 'date'], sort=False)['epoch'].shift(-1)
    hours = ((nxt - frame['epoch']) / 3600.0).fillna(QUARTER_HOUR)
    work = pd.DataFrame({'cell_id': frame['cell_id'], 'date': frame['date'],
                         'energy': frame['irradiance'] * hours, 'widened': hours > QUARTER_HOUR + 1e-6})
    daily = work.groupby(['date', 'cell_id'], sort=True).agg(total_kwh_m2=('energy', 'sum'),
                                                             n_missing=('widened', 'sum')).reset_index()
    daily['n_missing'] = daily['n_missing'].astype(int)
    return daily[['date', 'cell_id', 'total_kwh_m2', 'n_missing']]


def daily_fields(daily: pd.DataFrame) -> Dict[dt.date, DailyIrradianceField]:
    """One DailyIrradianceField per date of a daily_irradiance.csv frame."""
    fields = {}
    for day, group in daily.groupby('date', sort=True):
        cells = group['cell_id'].astype(int).tolist()
        totals = group['total_kwh_m2'].astype(float).tolist()
        fields[day] = DailyIrradianceField(date=day, totals=dict(zip(cells, totals)),
                                           n_missing=dict(zip(cells, group['n_missing'].astype(int).tolist())))
    return fields


class CellIndex:
    """
    Read-only nearest-cell lookup. Ties go to the smallest cell_id.

    Attributes:
        ids (np.ndarray): Cell ids in ascending order.
        lats (np.ndarray): Cell center latitudes, same order.
        lons (np.ndarray): Cell center longitudes, same order.
    """

    def __init__(self, cells: Iterable[IrradianceCell]):
        cells = sorted(cells, key=lambda c: c.cell_id)
        if not cells:
            raise ValueError('cannot index an empty cell list')
        self.ids = np.array([c.cell_id for c in cells], dtype=np.int64)
        self.lats = np.array([c.lat for c in cells], dtype=float)
        self.lons = np.array([c.lon for c in cells], dtype=float)

    def __len__(self) -> int:
        return len(self.ids)

    def nearest_many(self, lats: Sequence[float], lons: Sequence[float],
                     chunk: int = 2048) -> Tuple[np.ndarray, np.ndarray]:
        """Nearest cell id and its distance (km) for each point."""
        lats, lons = np.asarray(lats, dtype=float), np.asarray(lons, dtype=float)
        ids = np.empty(len(lats), dtype=np.int64)
        dists = np.empty(len(lats), dtype=float)
        for start in range(0, len(lats), chunk):
            sl = slice(start, start + chunk)
            d = great_circle_km(lats[sl, None], lons[sl, None], self.lats[None, :], self.lons[None, :])
            d = np.atleast_2d(d)
            best = d.min(axis=1)
            pick = np.argmax(d <= best[:, None] + _TIE_KM, axis=1)
            ids[sl], dists[sl] = self.ids[pick], best
        return ids, dists

    def nearest(self, lat: float, lon: float) -> int:
        return int(self.nearest_many([lat], [lon])[0][0])


def nearest_cell(point: Tuple[float, float], cells: Iterable[IrradianceCell]) -> int:
    """The cell with the smallest great-circle distance to point (lat, lon)."""
    return CellIndex(cells).nearest(*point)


def match_centroids(centroids: Iterable[Pc4Centroid], index: CellIndex) -> pd.DataFrame:
    """pc4_cells.csv layout: pc4, cell_id, distance_km."""
    centroids = sorted(centroids, key=lambda c: c.pc4)
    ids, dists = index.nearest_many([c.lat for c in centroids], [c.lon for c in centroids])
    return pd.DataFrame({'pc4': [c.pc4 for c in centroids], 'cell_id': ids, 'distance_km': dists},
                        columns=['pc4', 'cell_id', 'distance_km'])


class IrradianceGrid:
    """
    Daily irradiance looked up by PC4: PC4 -> nearest cell -> that cell's daily total.

    Args:
        pc4_cells: Mapping of pc4 to cell id.
        daily: Frame with date, cell_id, total_kwh_m2 and optionally n_missing (the daily_irradiance.csv layout).
    """

    def __init__(self, pc4_cells: Mapping[str, int], daily: pd.DataFrame):
        self.pc4_cells = dict(pc4_cells)
        if 'n_missing' not in daily:
            daily = daily.assign(n_missing=0)
        self.fields = daily_fields(daily)

    @property
    def dates(self):
        return sorted(self.fields)

    def irradiance_at(self, pc4: str, day: dt.date) -> float:
        """
        Raises:
            NoIrradianceError: The PC4 is unmatched or its cell has no data for the day.
        """
        cell = self.pc4_cells.get(pc4)
        field = self.fields.get(day)
        value = field.totals.get(cell) if field is not None and cell is not None else None
        if value is None:
            raise NoIrradianceError(pc4, day)
        return value

    def irradiance_for(self, pc4s: Sequence[str], day: dt.date) -> np.ndarray:
        """Daily totals for many PC4s; NaN where irradiance_at would raise."""
        field = self.fields.get(day)
        day_totals = field.totals if field is not None else {}
        return np.array([day_totals.get(self.pc4_cells.get(p), np.nan) for p in pc4s], dtype=float)
