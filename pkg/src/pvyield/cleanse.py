"""
Metadata uniformization and the four per-system-per-day quality checks that build the daily reliable set.
"""
import datetime as dt
import math
from logging import getLogger
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from .structs import DailyRecord, IntradayLog, LocationResolution, Pc4Centroid, PvSystemMeta, Verdict
from .util import great_circle_km

logger = getLogger(__name__)

FAR_KM = 5.0
_TOL = 1e-9


class Thresholds(BaseModel):
    """
    Quality check thresholds.

    Attributes:
        ratio_low (float): Lowest accepted cumulative / integrated ratio, inclusive.
        ratio_high (float): Highest accepted ratio, inclusive.
        peak_factor (float): Peak power must stay strictly below peak_factor * system size.
        max_gap_minutes (float): Largest accepted interval between samples, inclusive.
    """
    ratio_low: float = 0.90
    ratio_high: float = 1.10
    peak_factor: float = 1.2
    max_gap_minutes: float = 15.0


class CheckOutcome(NamedTuple):
    passed: bool
    value: Optional[float] = None
    reason: str = ''


class CleaningResult(BaseModel):
    """
    All verdicts of a cleaning run.

    Attributes:
        records (list[DailyRecord]): One record per (system, day) evaluated, sorted by date then system.
        counts (dict): Number of reliable systems per day.
    """
    records: List[DailyRecord] = Field(default_factory=list)
    counts: Dict[dt.date, int] = Field(default_factory=dict)

    @property
    def reliable(self) -> List[DailyRecord]:
        return [r for r in self.records if r.reliable]


def reconcile_system_size(meta: PvSystemMeta) -> PvSystemMeta:
    """
    Compare panel_power * num_panels with system_size. The system size is kept either way; a mismatch only
    sets size_discrepancy. Panel fields are left untouched.
    """
    if meta.panel_power is None or meta.num_panels is None:
        return meta.model_copy(update={'size_discrepancy': False})
    panels_kwp = meta.panel_power * meta.num_panels / 1000
    return meta.model_copy(update={'size_discrepancy': not math.isclose(panels_kwp, meta.system_size, rel_tol=1e-3)})


def resolve_location(meta: PvSystemMeta, centroids: Mapping[str, Pc4Centroid]) -> LocationResolution:
    """The PC4 centroid is always the location; registered lat/lon is only checked against it."""
    centroid = centroids.get(meta.pc4)
    if centroid is None:
        return LocationResolution(system_id=meta.system_id, resolved_pc4=meta.pc4, excluded_reason='unknown pc4')
    if meta.lat_lon is None:
        return LocationResolution(system_id=meta.system_id, resolved_pc4=meta.pc4)
    distance = great_circle_km(meta.lat_lon[0], meta.lat_lon[1], centroid.lat, centroid.lon)
    return LocationResolution(system_id=meta.system_id, resolved_pc4=meta.pc4, distance_km=distance,
                              flag_far=distance > FAR_KM)


def integrate_power(log: IntradayLog) -> float:
    """Left-rectangle integral in kWh: each sample's power holds until the next sample."""
    if len(log) < 2:
        return 0.0
    hours = np.diff(log.timestamps) / 3600.0
    return float(np.dot(log.power[:-1], hours))


def check_cumulative_consistency(log: IntradayLog, thresholds: Thresholds = Thresholds()) -> CheckOutcome:
    """Passes iff the final cumulative reading is within [ratio_low, ratio_high] of the integrated power."""
    if len(log) == 0:
        return CheckOutcome(False, None, 'no samples')
    cum, integral = float(log.cum_energy[-1]), integrate_power(log)
    if integral <= 0:
        if cum > 0:
            return CheckOutcome(False, None, 'zero integral')
        return CheckOutcome(True, None)
    ratio = cum / integral
    passed = thresholds.ratio_low - _TOL <= ratio <= thresholds.ratio_high + _TOL
    return CheckOutcome(passed, ratio, '' if passed else 'cumulative mismatch')


def check_peak_vs_size(log: IntradayLog, meta: PvSystemMeta, thresholds: Thresholds = Thresholds()) -> CheckOutcome:
    peak = float(log.power.max()) if len(log) else 0.0
    passed = peak < thresholds.peak_factor * meta.system_size
    return CheckOutcome(passed, peak, '' if passed else 'peak exceeds system size')


def check_gaps(log: IntradayLog, thresholds: Thresholds = Thresholds()) -> CheckOutcome:
    if len(log) < 2:
        return CheckOutcome(False, 0.0, 'insufficient samples')
    max_gap = float(np.diff(log.timestamps).max()) / 60.0
    passed = max_gap <= thresholds.max_gap_minutes + _TOL
    return CheckOutcome(passed, max_gap, '' if passed else 'gap too large')


def days_of(period: Union[int, Iterable[dt.date]]) -> List[dt.date]:
    """Every date of a year, or the given dates sorted."""
    if isinstance(period, int):
        start = dt.date(period, 1, 1)
        return [start + dt.timedelta(days=i) for i in range((dt.date(period + 1, 1, 1) - start).days)]
    return sorted(set(period))


def check_day_coverage(system_id: str, period: Union[int, Iterable[dt.date]],
                       days_present: Set[dt.date]) -> Dict[dt.date, bool]:
    """Per-day coverage verdict: a day without samples fails, the system is kept for its other days."""
    return {day: day in days_present for day in days_of(period)}


def evaluate_day(log: IntradayLog, meta: PvSystemMeta, thresholds: Thresholds = Thresholds()) -> DailyRecord:
    """Run checks 1-3 on one system-day that has samples."""
    cumulative = check_cumulative_consistency(log, thresholds)
    peak = check_peak_vs_size(log, meta, thresholds)
    gaps = check_gaps(log, thresholds)
    reasons = [c.reason for c in (cumulative, peak, gaps) if not c.passed]
    return DailyRecord(system_id=log.system_id, date=log.date,
                       cum_energy=float(log.cum_energy[-1]) if len(log) else 0.0,
                       instantaneous_sum=integrate_power(log), peak_power=peak.value or 0.0,
                       max_gap=gaps.value or 0.0, ratio=cumulative.value,
                       verdict=Verdict(cumulative=cumulative.passed, peak=peak.passed, gaps=gaps.passed,
                                       coverage=True, reasons=reasons))


def build_reliable_set(logs: Iterable[IntradayLog], metas: Iterable[PvSystemMeta],
                       dates: Union[dt.date, Sequence[dt.date], None] = None,
                       thresholds: Thresholds = Thresholds(), excluded: Set[str] = frozenset()) -> CleaningResult:
    """
    Evaluate every (system, day) for the given date(s) and return all verdicts. Systems in `excluded`
    (e.g. unknown PC4) and logs without metadata contribute nothing.

    Args:
        logs: Intraday logs, any order.
        metas: Metadata of the logger systems.
        dates: One date, several dates, or None for every date that occurs in the logs.
        thresholds: Check thresholds.
        excluded: System ids to leave out.

    Returns:
        CleaningResult: verdicts sorted by (date, system_id) and reliable counts per day.
    """
    meta_by_id = {m.system_id: m for m in metas if m.system_id not in excluded}
    by_key: Dict[tuple, IntradayLog] = {}
    orphans = set()
    for log in logs:
        if log.system_id not in meta_by_id:
            orphans.add(log.system_id)
            continue
        by_key[(log.system_id, log.date)] = log
    if orphans:
        logger.warning(f'{len(orphans)} logged system(s) have no usable metadata and are skipped')

    if dates is None:
        period = sorted({day for _, day in by_key})
    elif isinstance(dates, dt.date):
        period = [dates]
    else:
        period = sorted(set(dates))

    present: Dict[str, Set[dt.date]] = {sid: set() for sid in meta_by_id}
    for sid, day in by_key:
        present[sid].add(day)

    result = CleaningResult()
    for sid in sorted(meta_by_id):
        coverage = check_day_coverage(sid, period, present[sid])
        for day, covered in coverage.items():
            if covered:
                result.records.append(evaluate_day(by_key[(sid, day)], meta_by_id[sid], thresholds))
            else:
                result.records.append(DailyRecord(system_id=sid, date=day, verdict=Verdict(
                    coverage=False, reasons=['no samples'])))
    result.records.sort(key=lambda r: (r.date, r.system_id))
    result.counts = {day: 0 for day in period}
    for rec in result.records:
        result.counts[rec.date] += rec.reliable
    total = sum(result.counts.values())
    logger.info(f'Cleaning kept {total} of {len(result.records)} system-days over {len(period)} day(s)')
    return result


def records_frame(records: Sequence[DailyRecord]) -> pd.DataFrame:
    """reliable_set.csv layout."""
    return pd.DataFrame({
        'system_id': [r.system_id for r in records],
        'date': [r.date.isoformat() for r in records],
        'cum_energy_kwh': [r.cum_energy for r in records],
        'peak_kw': [r.peak_power for r in records],
        'max_gap_min': [r.max_gap for r in records],
        'check1': [r.verdict.cumulative for r in records],
        'check2': [r.verdict.peak for r in records],
        'check3': [r.verdict.gaps for r in records],
        'check4': [r.verdict.coverage for r in records],
        'reliable': [r.reliable for r in records],
    }, columns=['system_id', 'date', 'cum_energy_kwh', 'peak_kw', 'max_gap_min', 'check1', 'check2', 'check3',
                'check4', 'reliable'])


def counts_frame(counts: Mapping[dt.date, int]) -> pd.DataFrame:
    return pd.DataFrame({'date': [d.isoformat() for d in sorted(counts)],
                         'n_reliable': [counts[d] for d in sorted(counts)]}, columns=['date', 'n_reliable'])


def locations_frame(resolutions: Sequence[LocationResolution], metas: Mapping[str, PvSystemMeta]) -> pd.DataFrame:
    return pd.DataFrame({
        'system_id': [r.system_id for r in resolutions],
        'resolved_pc4': [r.resolved_pc4 for r in resolutions],
        'distance_km': [r.distance_km for r in resolutions],
        'flag_far': [r.flag_far for r in resolutions],
        'size_discrepancy': [metas[r.system_id].size_discrepancy for r in resolutions],
        'excluded_reason': [r.excluded_reason for r in resolutions],
    }, columns=['system_id', 'resolved_pc4', 'distance_km', 'flag_far', 'size_discrepancy', 'excluded_reason'])
