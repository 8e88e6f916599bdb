"""Small shared helpers: great-circle distances, binning axes, checksums and seed derivation."""
import hashlib
import math
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

EARTH_RADIUS_KM = 6371.0
OUT_OF_RANGE = -1

# keeps values that sit on an edge after float division (0.3 / 0.1) in the upper bin
_EDGE_TOLERANCE = 1e-9


def great_circle_km(lat1, lon1, lat2, lon2):
    """
    Great-circle distance on a 6371 km sphere using the spherical law of cosines.
    Accepts scalars or numpy arrays (broadcast).

    Returns:
        float | np.ndarray: distance in km.
    """
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(v, dtype=float)) for v in (lat1, lon1, lat2, lon2))
    cos_angle = np.sin(lat1) * np.sin(lat2) + np.cos(lat1) * np.cos(lat2) * np.cos(lon2 - lon1)
    dist = EARTH_RADIUS_KM * np.arccos(np.clip(cos_angle, -1.0, 1.0))
    return float(dist) if np.ndim(dist) == 0 else dist


class Axis(BaseModel):
    """
    A regular binning axis. Bins are left-closed and right-open except the last one, which also holds `hi`.

    Attributes:
        lo (float): Lower edge of the first bin.
        hi (float): Upper edge of the last bin.
        delta (float): Bin width.
    """
    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float
    delta: float

    @model_validator(mode='after')
    def _check(self):
        if self.delta <= 0:
            raise ValueError('bin width must be positive')
        if self.hi <= self.lo:
            raise ValueError('axis upper edge must exceed lower edge')
        return self

    @classmethod
    def spanning(cls, values: Iterable[float], delta: float) -> 'Axis':
        """An axis whose edges are multiples of delta and which covers every finite value."""
        arr = np.asarray(list(values), dtype=float)
        arr = arr[np.isfinite(arr)]
        if arr.size == 0:
            return cls(lo=0.0, hi=delta, delta=delta)
        lo = math.floor(arr.min() / delta + _EDGE_TOLERANCE) * delta
        hi = math.ceil(arr.max() / delta - _EDGE_TOLERANCE) * delta
        if hi <= lo:
            hi = lo + delta
        return cls(lo=lo, hi=hi, delta=delta)

    @property
    def n_bins(self) -> int:
        return max(1, int(round((self.hi - self.lo) / self.delta)))

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.delta * np.arange(self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.lo + self.delta * (np.arange(self.n_bins) + 0.5)

    def index(self, value: float) -> int:
        """Bin index of value, or OUT_OF_RANGE."""
        return int(self.indices([value])[0])

    def indices(self, values: Union[Sequence[float], np.ndarray]) -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        out = np.full(arr.shape, OUT_OF_RANGE, dtype=np.int64)
        ok = np.isfinite(arr) & (arr >= self.lo - _EDGE_TOLERANCE) & (arr <= self.hi + _EDGE_TOLERANCE)
        idx = np.floor((arr[ok] - self.lo) / self.delta + _EDGE_TOLERANCE).astype(np.int64)
        out[ok] = np.clip(idx, 0, self.n_bins - 1)
        return out


def derive_seed(*keys: int) -> int:
    """A 32-bit seed that depends only on the given integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def file_checksum(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()
