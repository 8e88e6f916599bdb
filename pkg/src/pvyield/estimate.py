"""
National yield estimation: scenario filters, per-day densities from the rebalanced realizations, yield
assignment to register entries and the bootstrap, plus period rollups and the fixed-factor baseline.
"""
import datetime as dt
import math
from logging import getLogger
from typing import Dict, FrozenSet, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from .cleanse import days_of
from .density import DX, DY, MEMBER_MEAN, BinGrid, ConditionalYieldDensity, build_density, yield_axis
from .exceptions import (EmptyDayError, MissingDaysError, NonConvergenceError, PvYieldError, ScenarioEmptyError,
                         UnfillableBinError)
from .normalize import (IRRADIANCE, LEEWAY, MAX_ITERS_FACTOR, REALIZATIONS, DistributionVector, ParamBinning,
                        Realization, deviations, histogram, make_realizations, reference_distributions)
from .structs import PvSystemMeta, RegisterEntry, YieldEstimate
from .util import derive_seed

logger = getLogger(__name__)

BOOTSTRAP = 500
BASELINE_FACTOR = 875.0
POPULATION_COLUMNS = ['system_id', 'orientation', 'tilt', 'epsilon', 'irradiance', 'specific']

# monthly shares (%) of the large installations' output in 2016, kept as a reference row in reports
REFERENCE_MONTHLY_SHARES = (2.5, 4.7, 8.0, 11.5, 14.2, 12.5, 13.5, 12.4, 10.1, 5.6, 2.9, 2.2)


class Interval(BaseModel):
    model_config = ConfigDict(frozen=True)

    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = True
    hi_closed: bool = True

    def contains(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        above = v >= self.lo if self.lo_closed else v > self.lo
        below = v <= self.hi if self.hi_closed else v < self.hi
        return above & below


class Scenario(BaseModel):
    """
    A restriction of the logger population in (orientation, tilt, epsilon) space. A filter left as None
    keeps everything.

    Attributes:
        id (int): 1-15.
        phi (Interval | None): Accepted azimuths.
        phi_excluded (float | None): A single rejected azimuth.
        theta (Interval | None): Accepted tilts.
        epsilon (frozenset | None): Accepted epsilon classes.
        description (str): Human readable filter, used in reports.
    """
    model_config = ConfigDict(frozen=True)

    id: int
    phi: Optional[Interval] = None
    phi_excluded: Optional[float] = None
    theta: Optional[Interval] = None
    epsilon: Optional[FrozenSet[int]] = None
    description: str = ''

    def mask(self, frame: pd.DataFrame) -> np.ndarray:
        keep = np.ones(len(frame), dtype=bool)
        if self.phi is not None:
            keep &= self.phi.contains(frame['orientation'])
        if self.phi_excluded is not None:
            keep &= frame['orientation'].to_numpy(dtype=float) != self.phi_excluded
        if self.theta is not None:
            keep &= self.theta.contains(frame['tilt'])
        if self.epsilon is not None:
            keep &= frame['epsilon'].isin(sorted(self.epsilon)).to_numpy()
        return keep

    def matches(self, meta: PvSystemMeta) -> bool:
        frame = pd.DataFrame({'orientation': [meta.orientation], 'tilt': [meta.tilt], 'epsilon': [meta.epsilon]})
        return bool(self.mask(frame)[0])


def _scenario(id, description, phi=None, phi_excluded=None, theta=None, epsilon=None) -> Scenario:
    return Scenario(id=id, phi=phi, phi_excluded=phi_excluded, theta=theta,
                    epsilon=frozenset(epsilon) if epsilon is not None else None, description=description)


_SOUTHISH = Interval(lo=135, hi=225)
_MID_TILT = Interval(lo=30, hi=45, lo_closed=False, hi_closed=False)

SCENARIOS: Dict[int, Scenario] = {s.id: s for s in (
    _scenario(1, 'all systems'),
    _scenario(2, 'phi = 180', phi=Interval(lo=180, hi=180)),
    _scenario(3, '135 <= phi <= 225', phi=_SOUTHISH),
    _scenario(4, '90 <= phi <= 180', phi=Interval(lo=90, hi=180)),
    _scenario(5, '180 <= phi <= 270', phi=Interval(lo=180, hi=270)),
    _scenario(6, 'phi != 180', phi_excluded=180),
    _scenario(7, 'theta < 30', theta=Interval(hi=30, hi_closed=False)),
    _scenario(8, 'theta > 30', theta=Interval(lo=30, lo_closed=False)),
    _scenario(9, '30 < theta < 45', theta=_MID_TILT),
    _scenario(10, 'epsilon = 1', epsilon={1}),
    _scenario(11, 'epsilon = -1', epsilon={-1}),
    _scenario(12, 'epsilon in {0, 1}', epsilon={0, 1}),
    _scenario(13, 'epsilon in {-1, 0}', epsilon={-1, 0}),
    _scenario(14, '135 <= phi <= 225, 30 < theta < 45, epsilon = 1', phi=_SOUTHISH, theta=_MID_TILT, epsilon={1}),
    _scenario(15, '135 <= phi <= 225, 30 < theta < 45', phi=_SOUTHISH, theta=_MID_TILT),
)}


def get_scenario(scenario: Union[int, Scenario]) -> Scenario:
    if isinstance(scenario, Scenario):
        return scenario
    try:
        return SCENARIOS[int(scenario)]
    except (KeyError, ValueError):
        raise PvYieldError(f'unknown scenario {scenario}; expected 1-{len(SCENARIOS)}') from None


def apply_scenario(systems: Union[pd.DataFrame, Sequence[PvSystemMeta]], scenario: Union[int, Scenario]):
    """
    Keep the systems that pass every filter of the scenario.

    Args:
        systems: A population frame (orientation, tilt, epsilon columns) or system metadata.
        scenario: Scenario or its id.

    Raises:
        ScenarioEmptyError: Nothing is left.
    """
    scenario = get_scenario(scenario)
    if isinstance(systems, pd.DataFrame):
        kept = systems[scenario.mask(systems)]
    else:
        kept = [s for s in systems if scenario.matches(s)]
    if len(kept) == 0:
        raise ScenarioEmptyError(scenario.id)
    return kept


def population_frame(metas: Sequence[PvSystemMeta], specific: Sequence[float],
                     irradiance: Sequence[float]) -> pd.DataFrame:
    """One row per system with its binning parameters, daily irradiance and specific yield."""
    return pd.DataFrame({
        'system_id': [m.system_id for m in metas],
        'orientation': [m.orientation for m in metas],
        'tilt': [m.tilt for m in metas],
        'epsilon': [m.epsilon for m in metas],
        'irradiance': np.asarray(irradiance, dtype=float),
        'specific': np.asarray(specific, dtype=float),
    }, columns=POPULATION_COLUMNS)


def scenario_references(reference: pd.DataFrame, scenario: Union[int, Scenario],
                        binning: ParamBinning = ParamBinning()) -> Dict[str, DistributionVector]:
    """Orientation, tilt and epsilon targets taken from the reference day inside the scenario's population."""
    return reference_distributions(apply_scenario(reference, scenario), binning)


def register_in_force(register: Sequence[RegisterEntry], day: dt.date) -> Tuple[List[RegisterEntry], float]:
    """Entries installed on or before day and their total capacity (kWp)."""
    entries = [e for e in register if e.install_date <= day]
    return entries, float(sum(e.capacity for e in entries))


def assign_daily_yield(density: ConditionalYieldDensity, irradiance: Sequence[float], capacity: Sequence[float],
                       rng: Union[int, np.random.Generator, np.random.SeedSequence] = 0) -> float:
    """
    Draw a yield bin per register entry from its irradiance column, take that bin's value as the entry's specific
    yield and sum the energies.

    Entries whose irradiance is missing, off the grid or in an empty column get the density's fallback mean.

    Args:
        density: The day's conditional yield density.
        irradiance: kWh/m2 per entry, NaN when unknown.
        capacity: kWp per entry.
        rng: Generator or seed.

    Returns:
        float: Fleet energy, kWh.
    """
    rng = np.random.default_rng(rng)
    cap = np.asarray(capacity, dtype=float)
    if cap.size == 0:
        return 0.0
    ix = density.grid.x.indices(irradiance)
    ok = ix >= 0
    ok[ok] = ~density.empty_columns[ix[ok]]
    specific = np.full(cap.shape, density.fallback_mean_yield)
    if ok.any():
        u = rng.random(int(ok.sum()))
        cdf = density.cdf[ix[ok]]
        ybin = np.minimum((u[:, None] >= cdf).sum(axis=1), density.grid.y.n_bins - 1)
        specific[ok] = density.bin_values[ix[ok], ybin]
    return float(np.dot(specific, cap))


def bootstrap_day(densities: Sequence[ConditionalYieldDensity], irradiance: Sequence[float],
                  capacity: Sequence[float], day: Optional[dt.date] = None, b: int = BOOTSTRAP, base_seed: int = 0,
                  scenario: int = 1) -> YieldEstimate:
    """
    B yield assignments, each on a realization picked uniformly at random. Reports the mean and the
    population standard deviation of the fleet totals.
    """
    if b < 1:
        raise PvYieldError('at least one bootstrap iteration is required')
    if not densities:
        raise EmptyDayError(day)
    irradiance = np.asarray(irradiance, dtype=float)
    total_capacity = float(np.sum(capacity))
    draws = np.empty(b)
    for i, child in enumerate(np.random.SeedSequence(base_seed).spawn(b)):
        rng = np.random.default_rng(child)
        density = densities[int(rng.integers(len(densities)))]
        draws[i] = assign_daily_yield(density, irradiance, capacity, rng)
    mean, sigma = float(draws.mean()), float(draws.std())
    per_kwp = 1 / total_capacity if total_capacity > 0 else 0.0
    return YieldEstimate(scenario=scenario, date=day, year=day.year if day else None, mean_energy=mean,
                         sigma=sigma, mean_specific=mean * per_kwp, sigma_specific=sigma * per_kwp,
                         capacity=total_capacity, n_bootstrap=b, n_realizations=len(densities))


class EstimateSettings(BaseModel):
    dx: float = DX
    dy: float = DY
    placement: Literal['center', 'mean'] = MEMBER_MEAN
    leeway: float = LEEWAY
    realizations: int = REALIZATIONS
    bootstrap: int = BOOTSTRAP
    seed: int = 0
    max_iters_factor: int = MAX_ITERS_FACTOR

    @property
    def binning(self) -> ParamBinning:
        return ParamBinning(irradiance_delta=self.dx)


class DayInputs(BaseModel):
    """
    Everything one day's estimate needs.

    Attributes:
        date (date): The day.
        population (pd.DataFrame): Reliable systems of the day, POPULATION_COLUMNS.
        register_irradiance (np.ndarray): kWh/m2 per register entry in force, NaN when unknown.
        register_capacity (np.ndarray): kWp per register entry in force.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    date: dt.date
    population: pd.DataFrame
    register_irradiance: np.ndarray
    register_capacity: np.ndarray


class NormalizationSummary(BaseModel):
    date: dt.date
    scenario: int
    n_reliable: int
    mean_normalized_size: float
    converged: int
    normalized: bool
    max_deviation: float = 0.0


class DayOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    estimate: YieldEstimate
    summary: NormalizationSummary
    density: Optional[ConditionalYieldDensity] = None
    realizations: List[Realization] = Field(default_factory=list)


def estimate_day(inputs: DayInputs, references: Mapping[str, DistributionVector],
                 settings: EstimateSettings = EstimateSettings(), scenario: Union[int, Scenario] = 1) -> DayOutcome:
    """
    Filter, rebalance, histogram and bootstrap one day.

    When rebalancing fails the day is estimated from its reliable set as is and flagged as not normalized.

    Raises:
        ScenarioEmptyError: The scenario leaves no reliable system on this day.
        EmptyDayError: No reliable system with irradiance.
    """
    scenario = get_scenario(scenario)
    day = inputs.date
    population = apply_scenario(inputs.population, scenario)
    population = population[np.isfinite(population['irradiance']) & np.isfinite(population['specific'])]
    if population.empty:
        raise EmptyDayError(day)
    population = population.reset_index(drop=True)
    reg_irr = inputs.register_irradiance[np.isfinite(inputs.register_irradiance)]
    binning = settings.binning.with_irradiance(np.concatenate([population['irradiance'].to_numpy(), reg_irr]))
    target = histogram(reg_irr if reg_irr.size else population['irradiance'], 'irradiance', binning.irradiance)

    seed = derive_seed(settings.seed, scenario.id, day.toordinal())
    try:
        realizations = make_realizations(population, references, target, m=settings.realizations, base_seed=seed,
                                         leeway=settings.leeway,
                                         max_iters=settings.max_iters_factor * len(population))
        normalized = True
        worst = max(max(r.deviations.values()) for r in realizations)
    except (NonConvergenceError, UnfillableBinError) as err:
        logger.warning(f'{day} scenario {scenario.id}: {err}; using the reliable set without normalization')
        realizations = [Realization(seed=seed, indices=np.arange(len(population)))]
        normalized = False
        worst = max(deviations(population, np.arange(len(population)),
                               {**references, IRRADIANCE: target}).values())

    grid = BinGrid(x=binning.irradiance, y=yield_axis(population['specific'], settings.dy))
    irr, spec = population['irradiance'].to_numpy(), population['specific'].to_numpy()
    densities = [build_density(day, irr[r.indices], spec[r.indices], grid, placement=settings.placement)
                 for r in realizations]
    estimate = bootstrap_day(densities, inputs.register_irradiance, inputs.register_capacity, day,
                             b=settings.bootstrap, base_seed=seed, scenario=scenario.id)
    estimate.normalized = normalized
    summary = NormalizationSummary(date=day, scenario=scenario.id, n_reliable=len(population),
                                   mean_normalized_size=float(np.mean([len(r) for r in realizations])),
                                   converged=len(realizations) if normalized else 0, normalized=normalized,
                                   max_deviation=worst)
    return DayOutcome(estimate=estimate, summary=summary, density=densities[0], realizations=realizations)


def _capacity_at(register: Sequence[RegisterEntry], day: dt.date) -> float:
    return register_in_force(register, day)[1]


def period_rollup(estimates: Sequence[YieldEstimate], register: Sequence[RegisterEntry], start: dt.date,
                  end: dt.date, scenario: int = None) -> YieldEstimate:
    """
    Sum daily estimates over [start, end]. Sigmas add in quadrature; the specific yield divides by the mean of
    the capacities in force on start and end.
    """
    window = sorted((e for e in estimates if e.date is not None and start <= e.date <= end), key=lambda e: e.date)
    energy = float(sum(e.mean_energy for e in window))
    sigma = float(math.sqrt(sum(e.sigma ** 2 for e in window)))
    capacity = (_capacity_at(register, start) + _capacity_at(register, end)) / 2
    per_kwp = 1 / capacity if capacity > 0 else 0.0
    if scenario is None:
        scenario = window[0].scenario if window else 1
    return YieldEstimate(scenario=scenario, year=start.year if start.year == end.year else None,
                         mean_energy=energy, sigma=sigma, mean_specific=energy * per_kwp,
                         sigma_specific=sigma * per_kwp, capacity=capacity,
                         n_bootstrap=max((e.n_bootstrap for e in window), default=0),
                         n_realizations=max((e.n_realizations for e in window), default=0),
                         normalized=all(e.normalized for e in window), days=len(window))


def annual_rollup(estimates: Sequence[YieldEstimate], register: Sequence[RegisterEntry], year: int,
                  scenario: int = None) -> YieldEstimate:
    """
    Full-year rollup.

    Raises:
        MissingDaysError: Some day of the year has no estimate.
    """
    have = {e.date for e in estimates}
    missing = [d for d in days_of(year) if d not in have]
    if missing:
        raise MissingDaysError(missing)
    return period_rollup(estimates, register, dt.date(year, 1, 1), dt.date(year, 12, 31), scenario)


def baseline_sn(register: Sequence[RegisterEntry], year: int, factor: float = BASELINE_FACTOR) -> float:
    """Fixed-factor estimate: mean of the capacities in force on the first and last day times factor (kWh)."""
    return (_capacity_at(register, dt.date(year, 1, 1)) + _capacity_at(register, dt.date(year, 12, 31))) / 2 * factor


def monthly_shares(estimates: Sequence[YieldEstimate], year: int) -> List[float]:
    """Share of the year's energy per calendar month, in percent. All zero when nothing was produced."""
    energy = np.zeros(12)
    for e in estimates:
        if e.date is not None and e.date.year == year:
            energy[e.date.month - 1] += e.mean_energy
    total = energy.sum()
    if total <= 0:
        return [0.0] * 12
    return (energy / total * 100).tolist()


def scenario_daily_index(estimates: Sequence[YieldEstimate], baseline: Sequence[YieldEstimate]) -> pd.DataFrame:
    """
    100 x E_s,d / E_1,d per day both series have. Days with a zero denominator get NaN, days missing from the
    baseline are left out; both are logged.

    Returns:
        DataFrame: date, scenario, index.
    """
    base = {e.date: e.mean_energy for e in baseline}
    rows, undefined, unmatched = [], [], []
    for e in sorted(estimates, key=lambda e: e.date):
        if e.date not in base:
            unmatched.append(e.date)
            continue
        index = 100 * e.mean_energy / base[e.date] if base[e.date] else math.nan
        if math.isnan(index):
            undefined.append(e.date)
        rows.append((e.date.isoformat(), e.scenario, index))
    if undefined:
        logger.warning(f'scenario index undefined on {len(undefined)} day(s): {", ".join(map(str, undefined[:5]))}')
    if unmatched:
        logger.warning(f'scenario index skips {len(unmatched)} day(s) without a baseline estimate: '
                       f'{", ".join(map(str, unmatched[:5]))}')
    return pd.DataFrame(rows, columns=['date', 'scenario', 'index'])


def irradiance_ratio(estimates: Sequence[YieldEstimate], reference: Mapping[dt.date, float]) -> pd.DataFrame:
    """Specific daily yield over a reference station's daily irradiance; NaN where the reference is 0 or absent."""
    rows = []
    for e in sorted(estimates, key=lambda e: e.date):
        ref = reference.get(e.date, math.nan)
        ratio = e.mean_specific / ref if ref and not math.isnan(ref) else math.nan
        rows.append((e.date.isoformat(), e.scenario, e.mean_specific, ref, ratio))
    missing = sum(math.isnan(r[-1]) for r in rows)
    if missing:
        logger.warning(f'irradiance ratio undefined on {missing} day(s)')
    return pd.DataFrame(rows, columns=['date', 'scenario', 'specific_kwh_kwp', 'reference_kwh_m2', 'ratio'])


def daily_frame(estimates: Sequence[YieldEstimate]) -> pd.DataFrame:
    """daily_yield.csv layout."""
    estimates = sorted(estimates, key=lambda e: (e.scenario, e.date))
    return pd.DataFrame({
        'date': [e.date.isoformat() for e in estimates],
        'scenario': [e.scenario for e in estimates],
        'mean_kwh': [e.mean_energy for e in estimates],
        'sigma_kwh': [e.sigma for e in estimates],
        'mean_specific': [e.mean_specific for e in estimates],
        'sigma_specific': [e.sigma_specific for e in estimates],
        'capacity_kwp': [e.capacity for e in estimates],
        'normalized': [e.normalized for e in estimates],
    }, columns=['date', 'scenario', 'mean_kwh', 'sigma_kwh', 'mean_specific', 'sigma_specific', 'capacity_kwp',
                'normalized'])


def estimates_from_frame(frame: pd.DataFrame) -> List[YieldEstimate]:
    """Read daily_yield.csv rows back into estimates."""
    normalized = frame['normalized'].astype(str).str.lower().eq('true')
    return [YieldEstimate(scenario=int(r.scenario), date=dt.date.fromisoformat(str(r.date)),
                          year=int(str(r.date)[:4]), mean_energy=float(r.mean_kwh), sigma=float(r.sigma_kwh),
                          mean_specific=float(r.mean_specific), sigma_specific=float(r.sigma_specific),
                          capacity=float(r.capacity_kwp), normalized=bool(n))
            for r, n in zip(frame.itertuples(index=False), normalized)]


def annual_frame(rollups: Sequence[Tuple[YieldEstimate, float, bool]]) -> pd.DataFrame:
    """annual_yield.csv layout from (rollup, baseline kWh, complete) triples."""
    return pd.DataFrame([{
        'year': r.year, 'scenario': r.scenario, 'energy_gwh': r.mean_energy / 1e6, 'sigma_gwh': r.sigma / 1e6,
        'specific_kwh_kwp': r.mean_specific, 'sigma_specific': r.sigma_specific, 'baseline_sn_gwh': base / 1e6,
        'days': r.days, 'complete': complete} for r, base, complete in rollups],
        columns=['year', 'scenario', 'energy_gwh', 'sigma_gwh', 'specific_kwh_kwp', 'sigma_specific',
                 'baseline_sn_gwh', 'days', 'complete'])


def monthly_frame(year: int, scenario: int, shares: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame({'year': year, 'scenario': scenario, 'month': range(1, 13), 'share_pct': list(shares)},
                        columns=['year', 'scenario', 'month', 'share_pct'])


def normalization_frame(summaries: Sequence[NormalizationSummary]) -> pd.DataFrame:
    """normalization.csv layout."""
    summaries = sorted(summaries, key=lambda s: (s.scenario, s.date))
    return pd.DataFrame([{**s.model_dump(), 'date': s.date.isoformat()} for s in summaries],
                        columns=['date', 'scenario', 'n_reliable', 'mean_normalized_size', 'converged', 'normalized',
                                 'max_deviation'])
