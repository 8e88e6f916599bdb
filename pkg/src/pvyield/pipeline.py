"""This module contains the Pipeline class that runs the stages and keeps their results."""

import asyncio
import datetime as dt
import hashlib
import io
import json
import os
from logging import getLogger
from pathlib import Path
from typing import Any, Awaitable, Callable, Dict, List, Optional, Tuple, Type

import numpy as np
import pandas as pd
from dotenv import find_dotenv, load_dotenv

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from . import cleanse, estimate as est, ingest, irradiance, regional
from .density import density_csv
from .exceptions import EmptyDayError, MissingDaysError, MissingInputError, PvYieldError, ScenarioEmptyError
from .storage_engines import LocalEngine, MemoryEngine, StorageEngine
from .structs import Config, PvSystemMeta, StageResult
from .synth import SynthConfig, generate
from .util import file_checksum

logger = getLogger(__name__)

INPUT_FILES = {'systems': 'systems.csv', 'intraday': 'intraday.csv', 'register': 'register.csv',
               'centroids': 'pc4_centroids.csv', 'irradiance': 'irradiance.csv', 'cells': 'cells.csv',
               'reference_irradiance': 'reference_irradiance.csv'}
STAGES = ('synth', 'clean', 'grid', 'estimate', 'regional', 'report')
RUN_ALL = ('clean', 'grid', 'estimate', 'regional', 'report')
ENV_PREFIX = 'PVYIELD_'
MANIFEST = 'manifest.json'

DEFAULTS: Config = {
    'input_dir': '.', 'inputs': {}, 'out': 'out', 'storage': 'local', 'bucket': '', 'region': '',
    'scenarios': [1], 'year': None, 'start_date': None, 'end_date': None, 'reference_date': None,
    'dx': 0.5, 'dy': 0.5, 'placement': 'mean', 'leeway': 0.015, 'realizations': 50, 'bootstrap': 500, 'seed': 0,
    'threads': os.cpu_count() or 1, 'max_iters_factor': 50, 'baseline_factor': 875.0, 'dump_densities': False,
    'synth': {},
}
# results do not depend on these, so they stay out of the manifest
_UNRECORDED = ('threads', 'storage', 'bucket', 'region', 'out')


def _cast(key: str, raw: str):
    default = DEFAULTS.get(key)
    if key == 'scenarios':
        return [int(s) for s in raw.replace(' ', '').split(',') if s]
    if isinstance(default, bool):
        return raw.strip().lower() in ('1', 'true', 'yes', 'on')
    if key in ('year', 'seed', 'threads', 'realizations', 'bootstrap', 'max_iters_factor'):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def env_overrides(environ=None) -> Config:
    """Config keys given as PVYIELD_<KEY> environment variables."""
    environ = os.environ if environ is None else environ
    out = {}
    for key in Config.__annotations__:
        raw = environ.get(f'{ENV_PREFIX}{key.upper()}')
        if raw is None or key in ('inputs', 'synth'):
            continue
        try:
            out[key] = _cast(key, raw)
        except ValueError:
            raise PvYieldError(f'invalid value for {ENV_PREFIX}{key.upper()}: {raw!r}') from None
    return out


def load_config(path=None, overrides: Optional[Dict[str, Any]] = None) -> Config:
    """
    Resolve the run configuration: defaults, then the TOML file, then PVYIELD_ environment variables (a .env file
    is read first), then overrides such as command line flags. None values in overrides are ignored.

    Raises:
        MissingInputError: The config file cannot be read.
        PvYieldError: The config file is not valid TOML.
    """
    config: Dict[str, Any] = {}
    if path:
        try:
            with open(path, 'rb') as fh:
                data = tomllib.load(fh)
        except OSError as err:
            raise MissingInputError(path) from err
        except tomllib.TOMLDecodeError as err:
            raise PvYieldError(f'invalid config file {path}: {err}') from err
        config.update(data.get('pvyield', data))
    load_dotenv(find_dotenv(usecwd=True))
    config.update(env_overrides())
    config.update({k: v for k, v in (overrides or {}).items() if v is not None and v != ()})
    unknown = sorted(set(config) - set(Config.__annotations__))
    if unknown:
        raise PvYieldError(f'unknown config key(s): {", ".join(unknown)}')
    return {**DEFAULTS, **config}


def _csv(frame: pd.DataFrame) -> bytes:
    buf = io.StringIO()
    frame.to_csv(buf, index=False)
    return buf.getvalue().encode()


def _date(value) -> Optional[dt.date]:
    if value is None or value == '':
        return None
    return value if isinstance(value, dt.date) else dt.date.fromisoformat(str(value))


class Pipeline:
    """
    Runs the stages against one configuration. Each stage reads its inputs from `input_dir` and its predecessors'
    tables from the storage engine, writes its own tables plus `manifest.json` through the engine and returns a
    StageResult. Errors are logged and recorded in the result, never raised.

    Attributes:
        config (Config): Resolved configuration.
        engine (StorageEngine): Output sink.
        results (list[StageResult]): Results of the stages run so far.
        StorageEngine (Type[StorageEngine]): Engine class, picked from config['storage'] unless set.

    Config:
        input_dir (str): Directory holding the input files.
        inputs (dict): Per-input path overrides keyed as INPUT_FILES.
        out (str): Output directory, or key prefix for s3.
        storage (str): local, memory or s3.
        scenarios (list[int]): Scenario ids to estimate.
        year (int): Restrict to one calendar year.
        seed (int): Base seed of every random draw.
        threads (int): Days estimated concurrently.
    """
    StorageEngine: Type[StorageEngine]

    def __init__(self, config: Config = None, engine: StorageEngine = None):
        self.config = {**DEFAULTS, **(config or {})}
        self.engine = engine or self.engine_class()(config=self.config)
        self.results: List[StageResult] = []

    def engine_class(self) -> Type[StorageEngine]:
        if getattr(self, 'StorageEngine', None) is not None:
            return self.StorageEngine
        storage = self.config.get('storage', 'local')
        if storage == 'local':
            return LocalEngine
        if storage == 'memory':
            return MemoryEngine
        if storage == 's3':
            try:
                from .storage_engines.s3_engine import S3Engine
            except ImportError as err:
                raise PvYieldError('s3 storage needs the s3 extra (boto3)') from err
            return S3Engine
        raise PvYieldError(f'unknown storage {storage!r}')

    def input_path(self, key: str) -> Path:
        override = (self.config.get('inputs') or {}).get(key)
        return Path(override) if override else Path(self.config.get('input_dir') or '.') / INPUT_FILES[key]

    @property
    def settings(self) -> est.EstimateSettings:
        c = self.config
        return est.EstimateSettings(dx=c['dx'], dy=c['dy'], placement=c['placement'], leeway=c['leeway'],
                                    realizations=c['realizations'], bootstrap=c['bootstrap'], seed=c['seed'],
                                    max_iters_factor=c['max_iters_factor'])

    @property
    def scenarios(self) -> List[est.Scenario]:
        return [est.get_scenario(s) for s in self.config.get('scenarios') or [1]]

    async def __call__(self, *stages: str) -> List[StageResult]:
        """Run stages in order, stopping at the first failure."""
        results = []
        for stage in stages:
            result = await self.run(stage)
            results.append(result)
            if not result.status:
                break
        return results

    async def run(self, stage: str) -> StageResult:
        """
        Run one stage.

        Args:
            stage (str): One of STAGES.

        Returns:
            StageResult: The saved outputs, or the error.
        """
        if stage not in STAGES:
            return self._record(StageResult(stage=stage, status=False, error=f'unknown stage {stage}'))
        logger.info(f'Running stage {stage}')
        try:
            work: Callable[[], Awaitable[Tuple[Dict[str, bytes], Dict[str, str]]]] = getattr(self, f'_{stage}')
            outputs, inputs = await work()
            if stage != 'synth':
                outputs[MANIFEST] = await self.manifest(stage, inputs)
            files = await self.engine_for(stage).multi_save(outputs=outputs)
            result = StageResult(stage=stage, files=[f for f in files if f.status],
                                 failed=[f for f in files if not f.status])
            result.status = not result.failed
            result.message = f'{len(result.files)} file(s) written'
            result.error = f'{len(result.failed)} file(s) not written' if result.failed else ''
        except PvYieldError as err:
            logger.error(f'Error running stage {stage}: {err} in {self.__class__.__name__}')
            result = StageResult(stage=stage, status=False, error=str(err), message=f'stage {stage} failed')
        return self._record(result)

    def _record(self, result: StageResult) -> StageResult:
        self.results.append(result)
        return result

    def engine_for(self, stage: str) -> StorageEngine:
        if stage == 'synth':
            return LocalEngine(config={'out': str(self.config.get('input_dir') or '.')})
        return self.engine

    async def manifest(self, stage: str, inputs: Dict[str, str]) -> bytes:
        """manifest.json merged with the one already in the sink: resolved config and per-stage input checksums."""
        try:
            doc = json.loads(await self.engine.load(MANIFEST))
        except (MissingInputError, ValueError):
            doc = {}
        doc['config'] = {k: v for k, v in sorted(self.config.items()) if k not in _UNRECORDED}
        doc.setdefault('stages', {})[stage] = {'inputs': dict(sorted(inputs.items()))}
        doc['stages'] = dict(sorted(doc['stages'].items()))
        return json.dumps(doc, indent=2, sort_keys=True, default=str).encode()

    def _read_input(self, key: str, loader: Callable, inputs: Dict[str, str]):
        path = self.input_path(key)
        if not path.is_file():
            raise MissingInputError(path)
        inputs[str(path)] = file_checksum(path)
        return loader(path)

    async def _read_output(self, name: str, inputs: Dict[str, str], **kwargs) -> pd.DataFrame:
        data = await self.engine.load(name)
        inputs[name] = hashlib.sha256(data).hexdigest()
        return pd.read_csv(io.BytesIO(data), **kwargs)

    def _period(self, dates) -> List[dt.date]:
        start, end, year = _date(self.config.get('start_date')), _date(self.config.get('end_date')), \
            self.config.get('year')
        days = set(dates)
        if year:
            days |= set(cleanse.days_of(int(year)))
            days = {d for d in days if d.year == int(year)}
        return sorted(d for d in days if (start is None or d >= start) and (end is None or d <= end))

    async def _synth(self):
        config = SynthConfig(**{'seed': self.config.get('seed', 0), **(self.config.get('synth') or {})})
        return generate(config).csv_files(), {}

    async def _clean(self):
        inputs: Dict[str, str] = {}
        systems = self._read_input('systems', ingest.load_system_meta, inputs)
        centroids = self._read_input('centroids', ingest.load_centroids, inputs)
        intraday = self._read_input('intraday', ingest.load_intraday, inputs)
        by_pc4 = {c.pc4: c for c in centroids.items}
        metas = {m.system_id: cleanse.reconcile_system_size(m) for m in systems.items}
        resolutions = [cleanse.resolve_location(m, by_pc4) for m in metas.values()]
        excluded = {r.system_id for r in resolutions if r.excluded_reason}
        if excluded:
            logger.warning(f'{len(excluded)} system(s) excluded for an unknown pc4')
        far = sum(r.flag_far for r in resolutions)
        discrepant = sum(m.size_discrepancy for m in metas.values())
        if metas:
            logger.info(f'{far} system(s) registered more than {cleanse.FAR_KM:g} km from their pc4 centroid; '
                        f'{discrepant / len(metas):.1%} have a panel/system size discrepancy')
        period = self._period({log.date for log in intraday.items})
        result = await asyncio.to_thread(cleanse.build_reliable_set, intraday.items, metas.values(), period,
                                         excluded=excluded)
        outputs = {
            'reliable_set.csv': _csv(cleanse.records_frame(result.records)),
            'daily_counts.csv': _csv(cleanse.counts_frame(result.counts)),
            'locations.csv': _csv(cleanse.locations_frame(resolutions, metas)),
            'systems.rejects.csv': ingest.rejects_csv(systems),
            'pc4_centroids.rejects.csv': ingest.rejects_csv(centroids),
            'intraday.rejects.csv': ingest.rejects_csv(intraday),
        }
        return outputs, inputs

    async def _grid(self):
        inputs: Dict[str, str] = {}
        cells = self._read_input('cells', ingest.load_cells, inputs)
        centroids = self._read_input('centroids', ingest.load_centroids, inputs)
        samples = self._read_input('irradiance', ingest.load_irradiance, inputs)
        if not cells.items:
            raise PvYieldError('no irradiance cells')
        index = irradiance.CellIndex(cells.items)
        daily = await asyncio.to_thread(irradiance.aggregate_frame, samples.frame)
        daily['date'] = [d.isoformat() for d in daily['date']]
        widened = int(daily['n_missing'].sum())
        if widened:
            logger.warning(f'{widened} irradiance interval(s) widened over missing quarter-hours')
        outputs = {
            'pc4_cells.csv': _csv(irradiance.match_centroids(centroids.items, index)),
            'daily_irradiance.csv': _csv(daily),
            'cells.rejects.csv': ingest.rejects_csv(cells),
            'irradiance.rejects.csv': ingest.rejects_csv(samples),
        }
        return outputs, inputs

    async def _irradiance_grid(self, inputs: Dict[str, str]) -> irradiance.IrradianceGrid:
        pc4_cells = await self._read_output('pc4_cells.csv', inputs, dtype={'pc4': str})
        daily = await self._read_output('daily_irradiance.csv', inputs)
        daily['date'] = [dt.date.fromisoformat(d) for d in daily['date'].astype(str)]
        return irradiance.IrradianceGrid(dict(zip(pc4_cells['pc4'].str.zfill(4), pc4_cells['cell_id'])), daily)

    def _day_inputs(self, day: dt.date, reliable: pd.DataFrame, metas: Dict[str, PvSystemMeta],
                    register, grid: irradiance.IrradianceGrid) -> est.DayInputs:
        rows = reliable[(reliable['date'] == day) & reliable['system_id'].isin(metas)]
        day_metas = [metas[s] for s in rows['system_id']]
        specific = rows['cum_energy_kwh'].to_numpy(dtype=float) / np.array([m.system_size for m in day_metas])
        population = est.population_frame(day_metas, specific, grid.irradiance_for([m.pc4 for m in day_metas], day))
        entries, _ = est.register_in_force(register, day)
        return est.DayInputs(date=day, population=population,
                             register_irradiance=grid.irradiance_for([e.pc4 for e in entries], day),
                             register_capacity=np.array([e.capacity for e in entries], dtype=float))

    async def _estimate(self):
        inputs: Dict[str, str] = {}
        metas = {m.system_id: m for m in self._read_input('systems', ingest.load_system_meta, inputs).items}
        register_rows = self._read_input('register', ingest.load_register, inputs)
        register = register_rows.items
        reliable = await self._read_output('reliable_set.csv', inputs, dtype={'system_id': str})
        period = self._period(dt.date.fromisoformat(d) for d in reliable['date'].astype(str).unique())
        reliable = reliable[reliable['reliable'].astype(str).str.lower().eq('true')].copy()
        reliable['date'] = [dt.date.fromisoformat(d) for d in reliable['date'].astype(str)]
        grid = await self._irradiance_grid(inputs)
        days = {day: self._day_inputs(day, reliable, metas, register, grid) for day in period}
        ref_day = _date(self.config.get('reference_date')) or next(
            (d for d in period if not days[d].population.empty), None)
        if ref_day is None:
            raise PvYieldError('no reliable system on any day of the period')
        reference = days[ref_day].population if ref_day in days else \
            self._day_inputs(ref_day, reliable, metas, register, grid).population
        settings = self.settings
        limit = asyncio.Semaphore(max(1, int(self.config.get('threads') or 1)))

        async def one_day(inputs_d, references, scenario):
            async with limit:
                try:
                    return await asyncio.to_thread(est.estimate_day, inputs_d, references, settings, scenario)
                except (EmptyDayError, ScenarioEmptyError) as err:
                    logger.warning(f'{inputs_d.date} scenario {scenario.id} skipped: {err}')
                    return None

        estimates, summaries, outputs = [], [], {}
        rollups, monthly = [], []
        for scenario in self.scenarios:
            try:
                references = est.scenario_references(reference, scenario, settings.binning)
            except ScenarioEmptyError as err:
                logger.warning(f'{err} on the reference day {ref_day}; scenario skipped')
                continue
            done = [o for o in await asyncio.gather(*[one_day(days[d], references, scenario) for d in period]) if o]
            scenario_estimates = [o.estimate for o in done]
            estimates += scenario_estimates
            summaries += [o.summary for o in done]
            if self.config.get('dump_densities'):
                for o in done:
                    outputs[f'densities/s{scenario.id}/density_{o.estimate.date}.csv'] = density_csv(o.density)
            for year in sorted({e.date.year for e in scenario_estimates}):
                rollups.append(self._rollup(scenario_estimates, register, year, scenario.id))
                monthly.append(est.monthly_frame(year, scenario.id, est.monthly_shares(scenario_estimates, year)))
            logger.info(f'Scenario {scenario.id}: estimated {len(done)} of {len(period)} day(s)')
        if not estimates:
            raise PvYieldError('no day could be estimated for scenario(s) '
                               f'{", ".join(str(s.id) for s in self.scenarios)}')
        outputs.update({
            'daily_yield.csv': _csv(est.daily_frame(estimates)),
            'annual_yield.csv': _csv(est.annual_frame(rollups)),
            'monthly_shares.csv': _csv(pd.concat(monthly, ignore_index=True)),
            'normalization.csv': _csv(est.normalization_frame(summaries)),
            'register.rejects.csv': ingest.rejects_csv(register_rows),
        })
        reference_path = self.input_path('reference_irradiance')
        if reference_path.is_file():
            reference_rows = self._read_input('reference_irradiance', ingest.load_reference_irradiance, inputs)
            outputs['irradiance_ratio.csv'] = _csv(est.irradiance_ratio(estimates, dict(reference_rows.items)))
            outputs['reference_irradiance.rejects.csv'] = ingest.rejects_csv(reference_rows)
        return outputs, inputs

    def _rollup(self, estimates, register, year: int, scenario: int):
        baseline = est.baseline_sn(register, year, self.config.get('baseline_factor', est.BASELINE_FACTOR))
        try:
            return est.annual_rollup(estimates, register, year, scenario), baseline, True
        except MissingDaysError as err:
            covered = sorted(e.date for e in estimates if e.date.year == year)
            logger.info(f'Scenario {scenario} {year}: {err}; rolling up {covered[0]} to {covered[-1]}')
            return est.period_rollup(estimates, register, covered[0], covered[-1], scenario), baseline, False

    async def _regional(self):
        inputs: Dict[str, str] = {}
        register_rows = self._read_input('register', ingest.load_register, inputs)
        register = register_rows.items
        wanted = {s.id for s in self.scenarios}
        estimates = [e for e in est.estimates_from_frame(await self._read_output('daily_yield.csv', inputs))
                     if e.scenario in wanted]
        if not estimates:
            raise PvYieldError(f'no daily estimates for scenario(s) {", ".join(map(str, sorted(wanted)))}')
        grid = await self._irradiance_grid(inputs)
        daily = []
        for e in estimates:
            entries, _ = est.register_in_force(register, e.date)
            daily += regional.regional_day(e, entries, grid.irradiance_for([r.pc4 for r in entries], e.date))
        annual = []
        for scenario in sorted(wanted):
            for year in sorted({e.date.year for e in estimates if e.scenario == scenario}):
                covered = sorted(e.date for e in estimates if e.scenario == scenario and e.date.year == year)
                rows = regional.municipal_period([r for r in daily if r.scenario == scenario], register,
                                                 covered[0], covered[-1])
                annual.append(regional.municipal_annual_frame(rows, covered[0], covered[-1]))
        return {'municipal_daily.csv': _csv(regional.municipal_daily_frame(daily)),
                'municipal_annual.csv': _csv(pd.concat(annual, ignore_index=True)),
                'register.rejects.csv': ingest.rejects_csv(register_rows)}, inputs

    async def _report(self):
        inputs: Dict[str, str] = {}
        annual = await self._read_output('annual_yield.csv', inputs)
        monthly = await self._read_output('monthly_shares.csv', inputs)
        daily = est.estimates_from_frame(await self._read_output('daily_yield.csv', inputs))
        outputs = {'report.txt': render_report(annual, monthly).encode()}
        base = [e for e in daily if e.scenario == 1]
        if base:
            index = [est.scenario_daily_index([e for e in daily if e.scenario == s], base)
                     for s in sorted({e.scenario for e in daily})]
            outputs['scenario_index.csv'] = _csv(pd.concat(index, ignore_index=True))
        return outputs, inputs


_MONTHS = ['Jan', 'Feb', 'Mar', 'Apr', 'May', 'Jun', 'Jul', 'Aug', 'Sep', 'Oct', 'Nov', 'Dec']


def render_report(annual: pd.DataFrame, monthly: pd.DataFrame) -> str:
    """Plain text summary: yields per scenario and year, then monthly shares with the reference row."""
    yields = pd.DataFrame({
        'year': annual['year'],
        'scenario': annual['scenario'],
        'filter': [est.get_scenario(s).description for s in annual['scenario']],
        'specific [kWh/kWp]': [f'{v:.1f} ± {s:.2f}' for v, s in zip(annual['specific_kwh_kwp'],
                                                                   annual['sigma_specific'])],
        'energy [GWh]': [f'{v:.4f} ± {s:.4f}' for v, s in zip(annual['energy_gwh'], annual['sigma_gwh'])],
        'baseline [GWh]': [f'{v:.4f}' for v in annual['baseline_sn_gwh']],
        'days': annual['days'],
        'complete': annual['complete'],
    })
    shares = monthly.pivot_table(index=['year', 'scenario'], columns='month', values='share_pct', aggfunc='sum')
    shares = shares.reindex(columns=range(1, 13), fill_value=0.0)
    shares.columns = _MONTHS
    shares.index = [f'{y} scenario {s}' for y, s in shares.index]
    shares.loc['2016 large installations (reference)'] = list(est.REFERENCE_MONTHLY_SHARES)
    return '\n'.join([
        'Specific and total yield per scenario',
        yields.to_string(index=False),
        '',
        'Monthly shares of total output [%]',
        shares.round(1).to_string(),
        '',
    ])
