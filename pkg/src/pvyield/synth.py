"""
Synthetic fleets with known yields.

A square irradiance grid gets a daily field (seasonal level x weather multiplier x west-high gradient x cell
noise) spread over the day as a half sine. Logger systems and register entries share one response model,

    power(t) = min(P * eta0 * g(phi) * s(theta, doy) * irr(t), inverter),

sampled every five minutes; daily energy is the left-rectangle sum of those samples, which is also what
truth.csv records for every register entry. Defects are injected per logger system-day and listed in
defects.csv together with the verdict cleaning is expected to reach.
"""
import datetime as dt
import io
import math
from logging import getLogger
from typing import Dict, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .irradiance import CellIndex
from .structs import CARDINALS, IrradianceCell

logger = getLogger(__name__)

STEP_HOURS = 1 / 12
QUARTER_HOURS = 0.25
_ORIENTATIONS = np.array([0, 45, 90, 135, 180, 225, 270, 315])
_ORIENTATION_WEIGHTS = np.array([0.05, 0.05, 0.10, 0.15, 0.35, 0.15, 0.10, 0.05])
# inverter size over system size for epsilon +1, 0, -1
_INVERTER_RATIOS = {1: 0.85, 0: 1.0, -1: 1.15}
_EPSILON_WEIGHTS = np.array([0.4, 0.3, 0.3])
_PANEL_POWERS = np.array([250, 270, 300])


class SynthConfig(BaseModel):
    """
    Generator settings. Every rate is a probability per logger system-day (defects) or per quarter-hour
    sample (irradiance_missing_rate).
    """
    model_config = ConfigDict(extra='forbid')

    seed: int = 0
    n_systems: int = 200
    n_register: int = 5000
    grid_rows: int = 20
    grid_cols: int = 20
    lat_min: float = 51.0
    lat_max: float = 53.5
    lon_min: float = 3.5
    lon_max: float = 7.2
    n_pc4: int = 300
    municipality_rows: int = 4
    municipality_cols: int = 4
    start_date: dt.date = dt.date(2016, 1, 1)
    n_days: int = 60

    eta0: float = 0.85
    orientation_gain: float = 0.3
    tilt_season: float = 0.1
    west_gradient: float = 0.25
    cell_noise: float = 0.05
    weather_range: Tuple[float, float] = (0.4, 1.1)

    register_growth: float = 0.1
    far_rate: float = 0.05
    no_coordinates_rate: float = 0.2
    discrepancy_rate: float = 0.1

    gap_rate: float = 0.05
    missing_day_rate: float = 0.05
    peak_rate: float = 0.05
    meter_error_rate: float = 0.05
    irradiance_missing_rate: float = 0.0

    @field_validator('register_growth', 'far_rate', 'no_coordinates_rate', 'discrepancy_rate', 'gap_rate',
                     'missing_day_rate', 'peak_rate', 'meter_error_rate', 'irradiance_missing_rate')
    @classmethod
    def _rate(cls, v):
        if not 0 <= v <= 1:
            raise ValueError('rates must lie in [0, 1]')
        return v

    @field_validator('n_systems', 'n_register', 'grid_rows', 'grid_cols', 'n_pc4', 'n_days', 'municipality_rows',
                     'municipality_cols')
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError('counts must be positive')
        return v

    @model_validator(mode='after')
    def _check(self):
        if self.gap_rate + self.missing_day_rate + self.peak_rate + self.meter_error_rate > 1:
            raise ValueError('defect rates add up to more than 1')
        if self.n_pc4 > 8999:
            raise ValueError('at most 8999 postal codes')
        return self

    @property
    def dates(self):
        return [self.start_date + dt.timedelta(days=i) for i in range(self.n_days)]


class SynthDataset(BaseModel):
    """Generated tables, keyed by the file name they are written to."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: SynthConfig
    tables: Dict[str, pd.DataFrame] = Field(default_factory=dict)

    def csv_files(self) -> Dict[str, bytes]:
        out = {}
        for name, frame in self.tables.items():
            buf = io.StringIO()
            frame.to_csv(buf, index=False, float_format='%.6f')
            out[name] = buf.getvalue().encode()
        return out

    def __getitem__(self, name: str) -> pd.DataFrame:
        return self.tables[name]


def _season(doy: int) -> float:
    return math.cos(2 * math.pi * (doy - 172) / 365)


def day_length(doy: int) -> float:
    return 12 + 4 * _season(doy)


def daylight_profile(times: np.ndarray, doy: int) -> np.ndarray:
    """Half-sine shape in 1/h that integrates to 1 over the day."""
    length = day_length(doy)
    rise = 12 - length / 2
    shape = math.pi / (2 * length) * np.sin(math.pi * (times - rise) / length)
    return np.where((times > rise) & (times < rise + length), np.maximum(shape, 0.0), 0.0)


def _grid_times(doy: int, step: float) -> np.ndarray:
    length = day_length(doy)
    first = math.floor((12 - length / 2) / step)
    last = math.ceil((12 + length / 2) / step)
    return np.arange(first, last + 1) * step


def orientation_factor(phi, gain: float) -> np.ndarray:
    """1 for South, 1 - gain for North."""
    return 1 - gain * (1 - np.cos(np.radians(np.asarray(phi, dtype=float) - 180))) / 2


def season_factor(theta, doy: int, k: float) -> np.ndarray:
    """Flat panels gain in summer and lose in winter, steep ones the opposite."""
    return 1 + k * (35 - np.asarray(theta, dtype=float)) / 55 * _season(doy)


def _stamps(day: dt.date, times: np.ndarray):
    minutes = np.rint(times * 60).astype(int)
    return np.array([f'{day.isoformat()}T{m // 60:02d}:{m % 60:02d}:00+00:00' for m in minutes])


class _Fleet(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    size: np.ndarray
    inverter: np.ndarray
    orientation: np.ndarray
    tilt: np.ndarray
    epsilon: np.ndarray
    cell: np.ndarray

    def power(self, config: SynthConfig, field: np.ndarray, doy: int, times: np.ndarray) -> np.ndarray:
        """Power (kW), shape (n, len(times))."""
        gain = (self.size * config.eta0 * orientation_factor(self.orientation, config.orientation_gain)
                * season_factor(self.tilt, doy, config.tilt_season) * field[self.cell])
        return np.minimum(gain[:, None] * daylight_profile(times, doy)[None, :], self.inverter[:, None])


def _draw_fleet(rng: np.random.Generator, n: int, cells: np.ndarray) -> _Fleet:
    size = np.round(np.clip(rng.lognormal(math.log(3.5), 0.4, n), 1.0, 25.0), 2)
    epsilon = rng.choice([1, 0, -1], size=n, p=_EPSILON_WEIGHTS)
    ratio = np.array([_INVERTER_RATIOS[e] for e in epsilon])
    return _Fleet(size=size, inverter=np.round(size * ratio, 3), epsilon=epsilon,
                  orientation=rng.choice(_ORIENTATIONS, size=n, p=_ORIENTATION_WEIGHTS),
                  tilt=np.round(np.clip(rng.normal(35, 10, n), 0, 80)), cell=cells)


def _offset(rng: np.random.Generator, lat: float, lon: float, km: float) -> Tuple[float, float]:
    bearing = rng.uniform(0, 2 * math.pi)
    dlat = km * math.cos(bearing) / 111.2
    dlon = km * math.sin(bearing) / (111.2 * math.cos(math.radians(lat)))
    return lat + dlat, lon + dlon


def generate(config: SynthConfig = SynthConfig()) -> SynthDataset:
    """
    Build every input table plus truth.csv and defects.csv. The result depends only on config.
    """
    rng = np.random.default_rng(config.seed)
    dates = config.dates

    # grid and postal codes
    lat_edges = np.linspace(config.lat_min, config.lat_max, config.grid_rows + 1)
    lon_edges = np.linspace(config.lon_min, config.lon_max, config.grid_cols + 1)
    lat_c, lon_c = (lat_edges[:-1] + lat_edges[1:]) / 2, (lon_edges[:-1] + lon_edges[1:]) / 2
    cell_lat, cell_lon = np.repeat(lat_c, config.grid_cols), np.tile(lon_c, config.grid_rows)
    cell_ids = np.arange(1, cell_lat.size + 1)
    cells = pd.DataFrame({'cell_id': cell_ids, 'lat': cell_lat, 'lon': cell_lon})

    pc4_lat = rng.uniform(config.lat_min, config.lat_max, config.n_pc4)
    pc4_lon = rng.uniform(config.lon_min, config.lon_max, config.n_pc4)
    pc4_codes = np.array([f'{1000 + i:04d}' for i in range(config.n_pc4)])
    centroids = pd.DataFrame({'pc4': pc4_codes, 'lat': pc4_lat, 'lon': pc4_lon})
    index = CellIndex([IrradianceCell(cell_id=int(c), lat=a, lon=o) for c, a, o in zip(cell_ids, cell_lat, cell_lon)])
    pc4_cell = np.searchsorted(cell_ids, index.nearest_many(pc4_lat, pc4_lon)[0])
    mun_row = np.minimum(((pc4_lat - config.lat_min) / (config.lat_max - config.lat_min)
                          * config.municipality_rows).astype(int), config.municipality_rows - 1)
    mun_col = np.minimum(((pc4_lon - config.lon_min) / (config.lon_max - config.lon_min)
                          * config.municipality_cols).astype(int), config.municipality_cols - 1)
    municipality = np.array([f'GM{r * config.municipality_cols + c + 1:04d}' for r, c in zip(mun_row, mun_col)])

    # daily irradiance totals per cell, kWh/m2
    west = (config.lon_max - cell_lon) / (config.lon_max - config.lon_min)
    field = np.empty((len(dates), cell_ids.size))
    for d, day in enumerate(dates):
        level = 3.5 + 2.5 * _season(day.timetuple().tm_yday)
        weather = rng.uniform(*config.weather_range)
        noise = np.clip(1 + rng.normal(0, config.cell_noise, cell_ids.size), 0.5, 1.5)
        field[d] = level * weather * (1 + config.west_gradient * west) * noise

    # logger systems
    sys_pc4 = rng.integers(config.n_pc4, size=config.n_systems)
    fleet = _draw_fleet(rng, config.n_systems, pc4_cell[sys_pc4])
    system_ids = np.array([f'S{i:05d}' for i in range(config.n_systems)])
    panel_power = rng.choice(_PANEL_POWERS, size=config.n_systems)
    num_panels = np.maximum(1, np.rint(fleet.size * 1000 / panel_power)).astype(int)
    discrepancy = rng.random(config.n_systems) < config.discrepancy_rate
    num_panels = np.where(discrepancy, num_panels + rng.choice([-3, -2, 2, 3], size=config.n_systems), num_panels)
    num_panels = np.maximum(num_panels, 1)
    lats, lons = [], []
    for i, p in enumerate(sys_pc4):
        u = rng.random()
        if u < config.no_coordinates_rate:
            lats.append(None)
            lons.append(None)
            continue
        km = rng.uniform(6, 15) if u < config.no_coordinates_rate + config.far_rate else rng.uniform(0, 1)
        lat, lon = _offset(rng, pc4_lat[p], pc4_lon[p], km)
        lats.append(round(lat, 6))
        lons.append(round(lon, 6))
    # some portals report the orientation as a cardinal sign
    signs = {v: k for k, v in CARDINALS.items()}
    orientation = [signs[o] if rng.random() < 0.2 else str(o) for o in fleet.orientation]
    first_day = dates[0]
    systems = pd.DataFrame({
        'system_id': system_ids, 'pc4': pc4_codes[sys_pc4], 'lat': lats, 'lon': lons,
        'system_size_kwp': fleet.size, 'inverter_size_kw': fleet.inverter, 'panel_power_w': panel_power,
        'num_panels': num_panels, 'orientation': orientation, 'tilt_deg': fleet.tilt.astype(int),
        'install_date': [(first_day - dt.timedelta(days=int(d))).isoformat()
                         for d in rng.integers(30, 3000, config.n_systems)],
    })

    # register entries with hidden orientation, tilt and epsilon
    reg_pc4 = rng.integers(config.n_pc4, size=config.n_register)
    register_fleet = _draw_fleet(rng, config.n_register, pc4_cell[reg_pc4])
    growth = rng.random(config.n_register) < config.register_growth
    install = np.where(growth, rng.integers(0, len(dates), config.n_register),
                       -rng.integers(1, 3000, config.n_register))
    entry_ids = np.array([f'R{i:06d}' for i in range(config.n_register)])
    register = pd.DataFrame({
        'entry_id': entry_ids, 'pc4': pc4_codes[reg_pc4], 'capacity_kwp': register_fleet.size,
        'install_date': [(first_day + dt.timedelta(days=int(d))).isoformat() for d in install],
        'municipality_code': municipality[reg_pc4],
    })

    intraday, irradiance, truth, defects = [], [], [], []
    kinds = np.array(['missing_day', 'gap', 'peak', 'meter'])
    thresholds = np.cumsum([config.missing_day_rate, config.gap_rate, config.peak_rate, config.meter_error_rate])
    for d, day in enumerate(dates):
        doy = day.timetuple().tm_yday
        times = _grid_times(doy, STEP_HOURS)
        stamps = _stamps(day, times)
        power = fleet.power(config, field[d], doy, times)
        cum = np.concatenate([np.zeros((config.n_systems, 1)), np.cumsum(power[:, :-1] * STEP_HOURS, axis=1)], axis=1)
        keep = np.ones(power.shape, dtype=bool)
        draws = rng.random(config.n_systems)
        for i in range(config.n_systems):
            kind = int(np.searchsorted(thresholds, draws[i], side='right'))
            if kind >= len(kinds):
                continue
            expected = False
            if kinds[kind] == 'missing_day':
                keep[i] = False
            elif kinds[kind] == 'gap':
                start = int(rng.integers(1, power.shape[1] - 5))
                keep[i, start:start + 4] = False
            elif kinds[kind] == 'peak':
                power[i, int(rng.integers(1, power.shape[1] - 1))] = 1.3 * fleet.size[i]
            else:
                if rng.random() < 0.5:
                    factor, expected = rng.uniform(0.93, 1.07), True
                else:
                    factor = rng.choice([rng.uniform(0.8, 0.87), rng.uniform(1.13, 1.2)])
                cum[i] *= factor
            defects.append((system_ids[i], day.isoformat(), kinds[kind], expected))
        rows, cols = np.nonzero(keep)
        intraday.append(pd.DataFrame({'system_id': system_ids[rows], 'timestamp': stamps[cols],
                                      'power_kw': power[rows, cols], 'cum_energy_kwh': cum[rows, cols]}))

        quarter = _grid_times(doy, QUARTER_HOURS)
        values = field[d][:, None] * daylight_profile(quarter, doy)[None, :]
        present = np.ones(values.shape, dtype=bool)
        if config.irradiance_missing_rate > 0:
            present[:, 1:-1] = rng.random((values.shape[0], values.shape[1] - 2)) >= config.irradiance_missing_rate
        rows, cols = np.nonzero(present)
        irradiance.append(pd.DataFrame({'cell_id': cell_ids[rows], 'timestamp': _stamps(day, quarter)[cols],
                                        'irradiance_kw_m2': values[rows, cols]}))

        in_force = install <= d
        reg_power = register_fleet.power(config, field[d], doy, times)
        energy = (reg_power[:, :-1] * STEP_HOURS).sum(axis=1)
        truth.append(pd.DataFrame({'entry_id': entry_ids[in_force], 'date': day.isoformat(),
                                   'energy_kwh': energy[in_force]}))

    station = int(np.argmin((cell_lat - (config.lat_min + config.lat_max) / 2) ** 2
                            + (cell_lon - (config.lon_min + config.lon_max) / 2) ** 2))
    reference = pd.DataFrame({'date': [d.isoformat() for d in dates], 'irradiance_kwh_m2': field[:, station]})

    tables = {
        'systems.csv': systems,
        'intraday.csv': pd.concat(intraday, ignore_index=True),
        'register.csv': register,
        'pc4_centroids.csv': centroids,
        'cells.csv': cells,
        'irradiance.csv': pd.concat(irradiance, ignore_index=True),
        'reference_irradiance.csv': reference,
        'truth.csv': pd.concat(truth, ignore_index=True),
        'defects.csv': pd.DataFrame(defects, columns=['system_id', 'date', 'kind', 'expected_reliable']),
    }
    logger.info(f'Generated {config.n_systems} systems, {config.n_register} register entries, '
                f'{cell_ids.size} cells over {len(dates)} day(s) with {len(defects)} defects')
    return SynthDataset(config=config, tables=tables)
