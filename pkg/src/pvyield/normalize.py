"""
Daily rebalancing of the reliable set in (orientation, tilt, epsilon, irradiance) space.

Members are dropped from over-represented bins and duplicated in under-represented ones until every marginal
share is within a leeway of its target: the reference day's shares for orientation, tilt and epsilon, and the
register's irradiance shares of the same day for irradiance.
"""
from logging import getLogger
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import NonConvergenceError, PvYieldError, UnfillableBinError
from .util import Axis

logger = getLogger(__name__)

ORIENTATION, TILT, EPSILON, IRRADIANCE = 'orientation', 'tilt', 'epsilon', 'irradiance'
PARAMETERS = (ORIENTATION, TILT, EPSILON, IRRADIANCE)
LEEWAY = 0.015
REALIZATIONS = 50
MAX_ITERS_FACTOR = 50
_TOL = 1e-12


class ParamBinning(BaseModel):
    """
    Bin layout per parameter. Epsilon bins are centred on its three classes; the irradiance axis depends on
    the day and is attached with `with_irradiance`.
    """
    model_config = ConfigDict(frozen=True)

    orientation: Axis = Axis(lo=0, hi=360, delta=45)
    tilt: Axis = Axis(lo=0, hi=90, delta=15)
    epsilon: Axis = Axis(lo=-1.5, hi=1.5, delta=1)
    irradiance_delta: float = 0.5
    irradiance: Optional[Axis] = None

    def axis(self, parameter: str) -> Axis:
        axis = getattr(self, parameter)
        if axis is None:
            raise PvYieldError(f'no axis for {parameter}; call with_irradiance first')
        return axis

    def with_irradiance(self, values: Sequence[float]) -> 'ParamBinning':
        return self.model_copy(update={'irradiance': Axis.spanning(values, self.irradiance_delta)})


class DistributionVector(BaseModel):
    """Shares h_i per bin of one parameter; they sum to one."""
    model_config = ConfigDict(frozen=True)

    parameter: str
    axis: Axis
    shares: Tuple[float, ...]

    @model_validator(mode='after')
    def _check(self):
        shares = np.asarray(self.shares)
        if len(shares) != self.axis.n_bins:
            raise ValueError('one share per bin expected')
        if (shares < 0).any() or abs(shares.sum() - 1) > 1e-9:
            raise ValueError('shares must be non-negative and sum to one')
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.shares, dtype=float)


class Realization(BaseModel):
    """
    One rebalanced multiset, given as positions into the input rows (a position repeats for duplicates).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    seed: int
    indices: np.ndarray
    iterations: int = 0
    deviations: Dict[str, float] = Field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.indices)


def histogram(values: Sequence[float], parameter: str, axis: Axis) -> DistributionVector:
    """
    Share of values per bin of axis; values outside the axis are ignored.

    Raises:
        PvYieldError: No value falls on the axis.
    """
    codes = axis.indices(values)
    codes = codes[codes >= 0]
    if codes.size == 0:
        raise PvYieldError(f'cannot build a {parameter} distribution from an empty set')
    counts = np.bincount(codes, minlength=axis.n_bins)
    return DistributionVector(parameter=parameter, axis=axis, shares=tuple((counts / counts.sum()).tolist()))


def reference_distributions(frame: pd.DataFrame, binning: ParamBinning = ParamBinning()) -> Dict[str, DistributionVector]:
    """Orientation, tilt and epsilon shares of a reference population."""
    return {p: histogram(frame[p].to_numpy(dtype=float), p, binning.axis(p)) for p in (ORIENTATION, TILT, EPSILON)}


def deviations(frame: pd.DataFrame, indices: np.ndarray,
               targets: Mapping[str, DistributionVector]) -> Dict[str, float]:
    """max_i |h_i - target_i| per parameter for the multiset frame.iloc[indices]."""
    out = {}
    for parameter, target in targets.items():
        codes = target.axis.indices(frame[parameter].to_numpy(dtype=float)[indices])
        codes = codes[codes >= 0]
        counts = np.bincount(codes, minlength=target.axis.n_bins)
        share = counts / counts.sum() if counts.sum() else counts.astype(float)
        out[parameter] = float(np.abs(share - target.as_array()).max())
    return out


def rebalance(day: pd.DataFrame, references: Mapping[str, DistributionVector], target_irradiance: DistributionVector,
              leeway: float = LEEWAY, rng_seed: int = 0, max_iters: int = None) -> Realization:
    """
    Drop or duplicate members until every marginal is within leeway of its target.

    The worst-deviating bin over all parameters is fixed first: a surplus drops, a deficit duplicates, one
    member of that bin drawn uniformly from the current multiset. A bin emptied earlier can be refilled from
    the input rows. Rows whose value lies outside a target axis never enter the multiset.

    Args:
        day: One row per reliable system with orientation, tilt, epsilon and irradiance columns.
        references: Orientation, tilt and epsilon targets.
        target_irradiance: Irradiance target.
        leeway: Largest accepted absolute share deviation.
        rng_seed: Seed of the member draws.
        max_iters: Iteration cap, 50 x rows by default.

    Raises:
        UnfillableBinError: A bin whose target exceeds the leeway has no input members.
        NonConvergenceError: The cap was reached; carries the final deviations.
    """
    if day.empty:
        raise PvYieldError('cannot rebalance an empty day')
    targets = {**{p: references[p] for p in (ORIENTATION, TILT, EPSILON)}, IRRADIANCE: target_irradiance}
    n = len(day)
    codes = {p: t.axis.indices(day[p].to_numpy(dtype=float)) for p, t in targets.items()}
    usable = np.logical_and.reduce([c >= 0 for c in codes.values()])
    if not usable.any():
        raise PvYieldError('no member of the day falls inside the target axes')
    shares = {p: t.as_array() for p, t in targets.items()}
    counts = {p: np.bincount(codes[p][usable], minlength=len(shares[p])).astype(np.int64) for p in targets}
    for p in targets:
        empty = (counts[p] == 0) & (shares[p] > leeway + _TOL)
        if empty.any():
            i = int(np.argmax(empty))
            raise UnfillableBinError(p, i, float(shares[p][i]))

    copies = usable.astype(np.int64)
    max_iters = MAX_ITERS_FACTOR * n if max_iters is None else max_iters
    rng = np.random.default_rng(rng_seed)
    for iteration in range(max_iters + 1):
        total = copies.sum()
        devs = {p: counts[p] / total - shares[p] if total else -shares[p] for p in targets}
        worst_p, worst_i, worst = None, -1, 0.0
        for p in PARAMETERS:
            i = int(np.argmax(np.abs(devs[p])))
            if abs(devs[p][i]) > abs(worst):
                worst_p, worst_i, worst = p, i, float(devs[p][i])
        if abs(worst) <= leeway + _TOL:
            logger.debug(f'rebalance seed {rng_seed} converged after {iteration} iterations, size {n} -> {total}')
            return Realization(seed=rng_seed, indices=np.repeat(np.arange(n), copies), iterations=iteration,
                               deviations={p: float(np.abs(d).max()) for p, d in devs.items()})
        if iteration == max_iters or total == 0:
            break
        in_bin = codes[worst_p] == worst_i
        pool = np.flatnonzero(in_bin & (copies > 0))
        if worst > 0 or pool.size:
            weights = copies[pool].astype(float)
        else:
            pool = np.flatnonzero(in_bin & usable)
            weights = np.ones(pool.size)
        if pool.size == 0:
            raise UnfillableBinError(worst_p, worst_i, float(shares[worst_p][worst_i]))
        k = int(rng.choice(pool, p=weights / weights.sum()))
        step = -1 if worst > 0 else 1
        copies[k] += step
        for p in targets:
            counts[p][codes[p][k]] += step
    raise NonConvergenceError({p: float(np.abs(d).max()) for p, d in devs.items()}, max_iters)


def make_realizations(day: pd.DataFrame, references: Mapping[str, DistributionVector],
                      target_irradiance: DistributionVector, m: int = REALIZATIONS, base_seed: int = 0,
                      leeway: float = LEEWAY, max_iters: int = None) -> List[Realization]:
    """M independent rebalances seeded base_seed + 0 ... M - 1."""
    if m < 1:
        raise PvYieldError('at least one realization is required')
    return [rebalance(day, references, target_irradiance, leeway=leeway, rng_seed=base_seed + i,
                      max_iters=max_iters) for i in range(m)]
