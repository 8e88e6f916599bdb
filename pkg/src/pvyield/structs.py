"""Data Structures"""
import datetime as dt
from typing import Any, Dict, List, Optional, Tuple, TypedDict

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

CARDINALS = {'N': 0, 'NE': 45, 'E': 90, 'SE': 135, 'S': 180, 'SW': 225, 'W': 270, 'NW': 315}
ORIENTATIONS = frozenset(CARDINALS.values())


def check_pc4(value: Any) -> str:
    value = str(value).strip()
    if len(value) != 4 or not value.isdigit():
        raise ValueError('pc4 must be 4 digits')
    return value


def parse_orientation(value: Any) -> int:
    """Map a cardinal sign (N, NE, ... NW) or one of the eight azimuths to degrees, 180 = South."""
    if isinstance(value, str):
        text = value.strip().upper()
        if text in CARDINALS:
            return CARDINALS[text]
        try:
            value = float(text)
        except ValueError:
            raise ValueError('unknown orientation') from None
    if isinstance(value, (int, float)) and float(value) in ORIENTATIONS:
        return int(value)
    raise ValueError('unknown orientation')


class PvSystemMeta(BaseModel):
    """
    One logger-registered PV system.

    Attributes:
        system_id (str): Opaque identifier.
        pc4 (str): Four digit postal code.
        lat_lon (tuple | None): Registered coordinates in degrees, if any.
        system_size (float): kWp.
        inverter_size (float): kW.
        panel_power (float | None): W per panel.
        num_panels (int | None): Number of panels.
        orientation (int): Azimuth in degrees, one of the eight cardinal directions.
        tilt (float): Degrees from horizontal.
        install_date (date): Installation date.
        size_discrepancy (bool): Set by reconciliation when panels do not add up to system_size.
    """
    system_id: str
    pc4: str
    lat_lon: Optional[Tuple[float, float]] = None
    system_size: float
    inverter_size: float
    panel_power: Optional[float] = None
    num_panels: Optional[int] = None
    orientation: int
    tilt: float
    install_date: dt.date
    size_discrepancy: bool = False

    @field_validator('pc4', mode='before')
    @classmethod
    def _pc4(cls, v):
        return check_pc4(v)

    @field_validator('orientation', mode='before')
    @classmethod
    def _orientation(cls, v):
        return parse_orientation(v)

    @field_validator('tilt')
    @classmethod
    def _tilt(cls, v):
        if not 0 <= v <= 90:
            raise ValueError('tilt out of range')
        return v

    @field_validator('system_size')
    @classmethod
    def _size(cls, v):
        if not v > 0:
            raise ValueError('system size must be positive')
        return v

    @field_validator('inverter_size')
    @classmethod
    def _inverter(cls, v):
        if not v > 0:
            raise ValueError('inverter size must be positive')
        return v

    @property
    def epsilon(self) -> int:
        """Sign of (system size - inverter size)."""
        return int(np.sign(round(self.system_size - self.inverter_size, 9)))


class IntradayLog(BaseModel):
    """
    One system-day of logger samples. Timestamps are seconds since the epoch (UTC).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    system_id: str
    date: dt.date
    timestamps: np.ndarray
    power: np.ndarray
    cum_energy: np.ndarray

    @model_validator(mode='after')
    def _check(self):
        if not len(self.timestamps) == len(self.power) == len(self.cum_energy):
            raise ValueError('sample arrays differ in length')
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError('timestamps not strictly increasing')
        if np.any(np.diff(self.cum_energy) < 0):
            raise ValueError('cumulative energy decreases')
        return self

    def __len__(self) -> int:
        return len(self.timestamps)


class RegisterEntry(BaseModel):
    """One installation in the national register."""
    entry_id: str
    pc4: str
    capacity: float
    install_date: dt.date
    municipality_code: str

    @field_validator('pc4', mode='before')
    @classmethod
    def _pc4(cls, v):
        return check_pc4(v)

    @field_validator('capacity')
    @classmethod
    def _capacity(cls, v):
        if not v > 0:
            raise ValueError('capacity must be positive')
        return v

    @field_validator('municipality_code', mode='before')
    @classmethod
    def _municipality(cls, v):
        v = str(v).strip()
        if not v:
            raise ValueError('municipality code missing')
        return v


class Pc4Centroid(BaseModel):
    pc4: str
    lat: float
    lon: float

    @field_validator('pc4', mode='before')
    @classmethod
    def _pc4(cls, v):
        return check_pc4(v)

    @field_validator('lat')
    @classmethod
    def _lat(cls, v):
        if not -90 <= v <= 90:
            raise ValueError('latitude out of range')
        return v

    @field_validator('lon')
    @classmethod
    def _lon(cls, v):
        if not -180 <= v <= 180:
            raise ValueError('longitude out of range')
        return v


class Reject(BaseModel):
    """A rejected input row. row_no counts data rows from 1, header excluded."""
    row_no: int
    reason: str


class Loaded(BaseModel):
    """
    Result of an input loader.

    Attributes:
        items (list): Accepted typed values.
        rejects (list[Reject]): One entry per rejected input row.
        source (str): Where the rows came from.
        n_rows (int): Number of data rows read.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    items: List[Any] = Field(default_factory=list)
    rejects: List[Reject] = Field(default_factory=list)
    source: str = ''
    n_rows: int = 0

    def __len__(self) -> int:
        return len(self.items)


class Verdict(BaseModel):
    """Per-check outcome of the four daily quality checks."""
    cumulative: bool = True
    peak: bool = True
    gaps: bool = True
    coverage: bool = True
    reasons: List[str] = Field(default_factory=list)

    @property
    def reliable(self) -> bool:
        return self.cumulative and self.peak and self.gaps and self.coverage


class DailyRecord(BaseModel):
    """
    One system-day after cleaning.

    Attributes:
        cum_energy (float): Final cumulative reading of the day, kWh.
        instantaneous_sum (float): Left-rectangle integral of the power samples, kWh.
        peak_power (float): Largest instantaneous sample, kW.
        max_gap (float): Largest inter-sample interval, minutes.
        ratio (float | None): cum_energy / instantaneous_sum.
    """
    system_id: str
    date: dt.date
    cum_energy: float = 0.0
    instantaneous_sum: float = 0.0
    peak_power: float = 0.0
    max_gap: float = 0.0
    ratio: Optional[float] = None
    verdict: Verdict = Field(default_factory=Verdict)

    @property
    def reliable(self) -> bool:
        return self.verdict.reliable


class LocationResolution(BaseModel):
    system_id: str
    resolved_pc4: str
    distance_km: Optional[float] = None
    flag_far: bool = False
    excluded_reason: str = ''


class IrradianceCell(BaseModel):
    cell_id: int
    lat: float
    lon: float


class QuarterHourSample(BaseModel):
    cell_id: int
    timestamp: dt.datetime
    irradiance: float

    @field_validator('irradiance')
    @classmethod
    def _irradiance(cls, v):
        if v < 0:
            raise ValueError('irradiance must be non-negative')
        return v


class DailyIrradianceField(BaseModel):
    """Daily irradiance totals (kWh/m2) per cell with the count of widened intervals per cell."""
    date: dt.date
    totals: Dict[int, float] = Field(default_factory=dict)
    n_missing: Dict[int, int] = Field(default_factory=dict)


class YieldEstimate(BaseModel):
    """
    Bootstrap estimate of the fleet energy for a day or a period.

    Attributes:
        mean_energy (float): kWh.
        sigma (float): kWh, 1 sigma.
        mean_specific (float): kWh/kWp over the capacity in force.
        capacity (float): kWp used as denominator.
    """
    scenario: int = 1
    date: Optional[dt.date] = None
    year: Optional[int] = None
    mean_energy: float
    sigma: float = 0.0
    mean_specific: float = 0.0
    sigma_specific: float = 0.0
    capacity: float = 0.0
    n_bootstrap: int = 1
    n_realizations: int = 1
    normalized: bool = True
    days: int = 1

    @field_validator('sigma')
    @classmethod
    def _sigma(cls, v):
        if v < 0:
            raise ValueError('sigma must be non-negative')
        return v


class RegionalYield(BaseModel):
    municipality_code: str
    date: Optional[dt.date] = None
    energy: float
    specific: float
    capacity: float = 0.0
    scenario: int = 1
    n_missing_irradiance: int = 0


class Config(TypedDict, total=False):
    """
    The configuration of a pipeline run. Missing keys fall back to pipeline.DEFAULTS.
    """
    input_dir: str
    inputs: Dict[str, str]
    out: str
    storage: str
    bucket: str
    region: str
    scenarios: List[int]
    year: int
    start_date: str
    end_date: str
    reference_date: str
    dx: float
    dy: float
    placement: str
    leeway: float
    realizations: int
    bootstrap: int
    seed: int
    threads: int
    max_iters_factor: int
    baseline_factor: float
    dump_densities: bool
    synth: Dict[str, Any]


class OutputFile(BaseModel):
    """
    The result of saving one output table.

    Attributes:
        name (str): Output name relative to the sink, e.g. daily_yield.csv.
        path (str): Local path, for local storage.
        url (str): Object url, for cloud storage.
        status (bool): Whether the save succeeded.
        size (int): Bytes written.
        rows (int): Data rows, when the output is a table.
        error (str): Error message if the save failed.
        message (str): Success message.
    """
    name: str
    path: str = ''
    url: str = ''
    status: bool = True
    size: int = 0
    rows: int = 0
    error: str = ''
    message: str = ''


class StageResult(BaseModel):
    """
    The outcome of one pipeline stage.

    Attributes:
        stage (str): Stage name.
        files (list[OutputFile]): Outputs saved.
        failed (list[OutputFile]): Outputs that could not be saved.
        status (bool): False when the stage raised.
        error (str): The stage error, if any.
        message (str): Summary line.
    """
    stage: str
    files: List[OutputFile] = Field(default_factory=list)
    failed: List[OutputFile] = Field(default_factory=list)
    status: bool = True
    error: str = ''
    message: str = ''

    def __len__(self) -> int:
        return len(self.files)
