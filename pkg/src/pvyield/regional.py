"""
Downscaling of the national specific daily yield to register entries by their local irradiance offset, and
aggregation to municipalities.

The mean irradiance the offsets are taken against is capacity weighted over the entries that have irradiance,
so that the entry energies add up to the national estimate.
"""
import datetime as dt
from collections import defaultdict
from logging import getLogger
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .estimate import register_in_force
from .exceptions import NoIrradianceError
from .structs import RegionalYield, RegisterEntry, YieldEstimate

logger = getLogger(__name__)


def irradiance_offset(irradiance, mean_irradiance: float):
    """
    I_jd / I_mean - 1.

    Raises:
        NoIrradianceError: mean_irradiance is not positive.
    """
    if not mean_irradiance > 0:
        raise NoIrradianceError(message='no national irradiance')
    offset = np.asarray(irradiance, dtype=float) / mean_irradiance - 1
    return float(offset) if offset.ndim == 0 else offset


def local_specific_yield(national_specific: float, offset):
    """national_specific * (1 + offset), kWh/kWp."""
    local = national_specific * (1 + np.asarray(offset, dtype=float))
    assert np.all(local >= -1e-12), 'negative local specific yield'
    local = np.maximum(local, 0.0)
    return float(local) if local.ndim == 0 else local


def local_energy(capacity, local_specific):
    """capacity (kWp) * local specific yield, kWh."""
    energy = np.asarray(capacity, dtype=float) * np.asarray(local_specific, dtype=float)
    return float(energy) if energy.ndim == 0 else energy


def capacity_weighted_mean(irradiance: Sequence[float], capacity: Sequence[float]) -> float:
    """Mean irradiance weighted by capacity over the entries with a finite irradiance."""
    irr, cap = np.asarray(irradiance, dtype=float), np.asarray(capacity, dtype=float)
    known = np.isfinite(irr)
    weight = cap[known].sum()
    if weight <= 0:
        raise NoIrradianceError(message='no national irradiance')
    return float(np.dot(irr[known], cap[known]) / weight)


def downscale_day(national_specific: float, irradiance: Sequence[float],
                  capacity: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Energy per entry for one day.

    Args:
        national_specific: The day's national specific yield, kWh/kWp.
        irradiance: kWh/m2 per entry, NaN when unknown (offset 0).
        capacity: kWp per entry.

    Returns:
        (energies kWh, mask of entries without irradiance)
    """
    irr, cap = np.asarray(irradiance, dtype=float), np.asarray(capacity, dtype=float)
    missing = ~np.isfinite(irr)
    offsets = np.zeros(irr.shape)
    if (~missing).any() and cap[~missing].sum() > 0:
        mean = capacity_weighted_mean(irr, cap)
        if mean > 0:
            offsets[~missing] = irradiance_offset(irr[~missing], mean)
    return local_energy(cap, local_specific_yield(national_specific, offsets)), missing


def municipality_rollup(entries: Sequence[RegisterEntry], energies: Sequence[float], day: dt.date = None,
                        scenario: int = 1, missing: Sequence[bool] = None) -> List[RegionalYield]:
    """Per-municipality energy and specific yield, sorted by municipality code."""
    energy: Dict[str, float] = defaultdict(float)
    capacity: Dict[str, float] = defaultdict(float)
    flagged: Dict[str, int] = defaultdict(int)
    missing = np.zeros(len(entries), dtype=bool) if missing is None else np.asarray(missing, dtype=bool)
    for entry, e, m in zip(entries, energies, missing):
        energy[entry.municipality_code] += float(e)
        capacity[entry.municipality_code] += entry.capacity
        flagged[entry.municipality_code] += int(m)
    return [RegionalYield(municipality_code=code, date=day, energy=energy[code],
                          specific=energy[code] / capacity[code] if capacity[code] else 0.0,
                          capacity=capacity[code], scenario=scenario, n_missing_irradiance=flagged[code])
            for code in sorted(energy)]


def regional_day(estimate: YieldEstimate, register: Sequence[RegisterEntry],
                 irradiance: Sequence[float]) -> List[RegionalYield]:
    """
    Municipal yields of one day from the national estimate.

    Args:
        estimate: National daily estimate.
        register: Entries in force on the estimate's day.
        irradiance: kWh/m2 per entry, same order.
    """
    capacity = np.array([e.capacity for e in register], dtype=float)
    energies, missing = downscale_day(estimate.mean_specific, irradiance, capacity)
    if missing.any():
        logger.warning(f'{estimate.date}: {int(missing.sum())} register entries lack irradiance, offset set to 0')
    return municipality_rollup(register, energies, estimate.date, estimate.scenario, missing)


def municipal_period(daily: Sequence[RegionalYield], register: Sequence[RegisterEntry], start: dt.date,
                     end: dt.date) -> List[RegionalYield]:
    """
    Sum municipal daily energies over [start, end]; specific yield over the mean of the municipality's
    capacities in force on start and end.
    """
    first, _ = register_in_force(register, start)
    last, _ = register_in_force(register, end)
    cap_start, cap_end = defaultdict(float), defaultdict(float)
    for e in first:
        cap_start[e.municipality_code] += e.capacity
    for e in last:
        cap_end[e.municipality_code] += e.capacity
    energy: Dict[Tuple[str, int], float] = defaultdict(float)
    missing: Dict[Tuple[str, int], int] = defaultdict(int)
    for r in daily:
        if r.date is not None and start <= r.date <= end:
            energy[(r.municipality_code, r.scenario)] += r.energy
            missing[(r.municipality_code, r.scenario)] += r.n_missing_irradiance
    out = []
    for (code, scenario) in sorted(energy, key=lambda k: (k[1], k[0])):
        capacity = (cap_start[code] + cap_end[code]) / 2
        out.append(RegionalYield(municipality_code=code, energy=energy[(code, scenario)],
                                 specific=energy[(code, scenario)] / capacity if capacity else 0.0,
                                 capacity=capacity, scenario=scenario,
                                 n_missing_irradiance=missing[(code, scenario)]))
    return out


def municipal_daily_frame(rows: Sequence[RegionalYield]) -> pd.DataFrame:
    """municipal_daily.csv layout."""
    rows = sorted(rows, key=lambda r: (r.scenario, r.date, r.municipality_code))
    return pd.DataFrame({
        'date': [r.date.isoformat() for r in rows],
        'municipality_code': [r.municipality_code for r in rows],
        'energy_kwh': [r.energy for r in rows],
        'specific_kwh_kwp': [r.specific for r in rows],
        'scenario': [r.scenario for r in rows],
        'n_missing_irradiance': [r.n_missing_irradiance for r in rows],
    }, columns=['date', 'municipality_code', 'energy_kwh', 'specific_kwh_kwp', 'scenario', 'n_missing_irradiance'])


def municipal_annual_frame(rows: Sequence[RegionalYield], start: dt.date, end: dt.date) -> pd.DataFrame:
    """municipal_annual.csv layout; the period is named by its first and last day."""
    return pd.DataFrame({
        'start': start.isoformat(), 'end': end.isoformat(),
        'municipality_code': [r.municipality_code for r in rows],
        'energy_kwh': [r.energy for r in rows],
        'specific_kwh_kwp': [r.specific for r in rows],
        'capacity_kwp': [r.capacity for r in rows],
        'scenario': [r.scenario for r in rows],
    }, columns=['start', 'end', 'municipality_code', 'energy_kwh', 'specific_kwh_kwp', 'capacity_kwp', 'scenario'])
