"""
Per-day 2D histogram of irradiance (x, kWh/m2) against specific yield (y, kWh/kWp), normalized per
irradiance column into P(yield bin | irradiance bin).
"""
import datetime as dt
import io
import math
from logging import getLogger
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from .exceptions import EmptyColumnError, EmptyDayError, PvYieldError
from .structs import DailyRecord, PvSystemMeta
from .util import OUT_OF_RANGE, Axis

logger = getLogger(__name__)

DX = 0.5
DY = 0.5
# value a drawn yield bin stands for: its center, or the mean of the members that fell into it
CENTER, MEMBER_MEAN = 'center', 'mean'
PLACEMENTS = (CENTER, MEMBER_MEAN)


class BinGrid(BaseModel):
    """
    Irradiance axis x and specific-yield axis y.
    """
    model_config = ConfigDict(frozen=True)

    x: Axis
    y: Axis

    @property
    def x_min(self) -> float:
        return self.x.lo

    @property
    def x_max(self) -> float:
        return self.x.hi

    @property
    def dx(self) -> float:
        return self.x.delta

    @property
    def y_min(self) -> float:
        return self.y.lo

    @property
    def y_max(self) -> float:
        return self.y.hi

    @property
    def dy(self) -> float:
        return self.y.delta

    @classmethod
    def for_day(cls, irradiance: Sequence[float], specific: Sequence[float], dx: float = DX, dy: float = DY) -> 'BinGrid':
        """x spans the observed irradiance on multiples of dx; y runs from 0 to the max yield rounded up to dy."""
        return cls(x=Axis.spanning(irradiance, dx), y=yield_axis(specific, dy))


def yield_axis(specific: Sequence[float], dy: float = DY) -> Axis:
    """Specific-yield axis from 0 to the largest finite value rounded up to a multiple of dy."""
    y = np.asarray(specific, dtype=float)
    top = float(np.nanmax(y)) if y.size and np.isfinite(y).any() else 0.0
    return Axis(lo=0.0, hi=max(dy, math.ceil(top / dy - 1e-9) * dy), delta=dy)


class ConditionalYieldDensity(BaseModel):
    """
    Attributes:
        date (date): The day.
        grid (BinGrid): Bin layout.
        counts (np.ndarray): Integer counts, shape (n_x, n_y).
        cond_prob (np.ndarray): counts normalized per irradiance column; empty columns are all zero.
        cdf (np.ndarray): Cumulative cond_prob along y, used for sampling.
        bin_values (np.ndarray): Specific yield each (irradiance, yield) bin stands for, shape (n_x, n_y).
        fallback_mean_yield (float): Mean specific yield of all the day's records, kWh/kWp.
        n_out_of_range (int): Records that fell outside the grid.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    date: Optional[dt.date] = None
    grid: BinGrid
    counts: np.ndarray
    cond_prob: np.ndarray
    cdf: np.ndarray
    bin_values: np.ndarray
    fallback_mean_yield: float
    n_out_of_range: int = 0

    @property
    def column_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def empty_columns(self) -> np.ndarray:
        return self.column_counts == 0


def specific_yield(record: DailyRecord, meta: PvSystemMeta) -> float:
    """Daily energy per installed kWp."""
    return record.cum_energy / meta.system_size


def bin_index(value: float, axis: Axis) -> int:
    """floor((value - lo) / delta), value == hi in the last bin, OUT_OF_RANGE outside the axis."""
    return axis.index(value)


def build_density(day: Optional[dt.date], irradiance: Sequence[float], specific: Sequence[float],
                  grid: BinGrid = None, dx: float = DX, dy: float = DY,
                  placement: str = CENTER) -> ConditionalYieldDensity:
    """
    Histogram the day's (irradiance, specific yield) pairs and normalize every irradiance column.

    Args:
        day: The date the records belong to.
        irradiance: kWh/m2 per record (duplicates allowed, one entry per multiset member).
        specific: kWh/kWp per record, same order.
        grid: Explicit grid; derived from the data when omitted.
        placement: CENTER keeps bin centers as bin values, MEMBER_MEAN uses the mean yield of each bin's members
            (empty bins keep their center).

    Raises:
        EmptyDayError: No records.
        PvYieldError: Unknown placement.
    """
    if placement not in PLACEMENTS:
        raise PvYieldError(f'unknown yield placement {placement!r}')
    x = np.asarray(irradiance, dtype=float)
    y = np.asarray(specific, dtype=float)
    if x.size == 0:
        raise EmptyDayError(day)
    grid = grid or BinGrid.for_day(x, y, dx, dy)
    ix, iy = grid.x.indices(x), grid.y.indices(y)
    inside = (ix != OUT_OF_RANGE) & (iy != OUT_OF_RANGE)
    counts = np.zeros((grid.x.n_bins, grid.y.n_bins), dtype=np.int64)
    np.add.at(counts, (ix[inside], iy[inside]), 1)
    totals = counts.sum(axis=1, keepdims=True)
    cond = np.divide(counts, totals, out=np.zeros(counts.shape, dtype=float), where=totals > 0)
    values = np.broadcast_to(grid.y.centers, counts.shape).astype(float)
    if placement == MEMBER_MEAN:
        sums = np.zeros(counts.shape)
        np.add.at(sums, (ix[inside], iy[inside]), y[inside])
        np.divide(sums, counts, out=values, where=counts > 0)
    finite = np.isfinite(y)
    fallback = float(y[finite].mean()) if finite.any() else 0.0
    return ConditionalYieldDensity(date=day, grid=grid, counts=counts, cond_prob=cond,
                                   cdf=np.cumsum(cond, axis=1), bin_values=values, fallback_mean_yield=fallback,
                                   n_out_of_range=int((~inside).sum()))


def expected_yield_in_column(density: ConditionalYieldDensity, column: int) -> float:
    """Closed-form mean of the column: sum of cond_prob times the bin values (the yield bin centers by default)."""
    if not 0 <= column < density.grid.x.n_bins or density.empty_columns[column]:
        raise EmptyColumnError(column)
    return float(np.dot(density.cond_prob[column], density.bin_values[column]))


def density_csv(density: ConditionalYieldDensity) -> bytes:
    """density_<date>.csv body: ibin,ybin,count,cond_prob for every non-empty cell."""
    ix, iy = np.nonzero(density.counts)
    frame = pd.DataFrame({'ibin': ix, 'ybin': iy, 'count': density.counts[ix, iy],
                          'cond_prob': density.cond_prob[ix, iy]})
    buf = io.StringIO()
    frame.to_csv(buf, index=False, float_format='%.10g')
    return buf.getvalue().encode()
