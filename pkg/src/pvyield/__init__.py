"""
import public modules and classes from pvyield
"""
from .pipeline import Pipeline, load_config, DEFAULTS, STAGES
from .exceptions import (PvYieldError, MissingInputError, EmptyDayError, ScenarioEmptyError, UnfillableBinError,
                         NonConvergenceError, NoIrradianceError, MissingDaysError, EmptyColumnError)
from .structs import Config, OutputFile, StageResult, PvSystemMeta, IntradayLog, RegisterEntry, YieldEstimate
from .estimate import SCENARIOS, Scenario
from .synth import SynthConfig, generate
from .storage_engines import StorageEngine, LocalEngine, MemoryEngine

try:
    from .storage_engines.s3_engine import S3Engine
except ImportError as err:
    pass
