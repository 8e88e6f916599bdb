from datetime import date
from typing import Dict, List


class PvYieldError(Exception):
    pass


class MissingInputError(PvYieldError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f'missing or unreadable input file: {self.path}')


class EmptyDayError(PvYieldError):
    def __init__(self, day: date = None):
        self.day = day
        super().__init__(f'empty day{f" {day}" if day else ""}')


class ScenarioEmptyError(PvYieldError):
    def __init__(self, scenario_id: int):
        self.scenario_id = scenario_id
        super().__init__(f'scenario {scenario_id} eliminates sample')


class UnfillableBinError(PvYieldError):
    def __init__(self, parameter: str, bin_index: int, target: float):
        self.parameter, self.bin_index, self.target = parameter, bin_index, target
        super().__init__(f'unfillable bin {bin_index} of {parameter} (target share {target:.4f})')


class NonConvergenceError(PvYieldError):
    """Rebalancing hit its iteration cap. `deviations` holds the final max |h - target| per parameter."""

    def __init__(self, deviations: Dict[str, float], iterations: int):
        self.deviations, self.iterations = deviations, iterations
        devs = ', '.join(f'{k}={v:.4f}' for k, v in deviations.items())
        super().__init__(f'rebalance did not converge after {iterations} iterations ({devs})')


class NoIrradianceError(PvYieldError):
    def __init__(self, pc4: str = '', day: date = None, message: str = ''):
        self.pc4, self.day = pc4, day
        super().__init__(message or f'no irradiance for pc4 {pc4} on {day}')


class MissingDaysError(PvYieldError):
    def __init__(self, missing: List[date]):
        self.missing = list(missing)
        shown = ', '.join(str(d) for d in self.missing[:10])
        more = f' (+{len(self.missing) - 10} more)' if len(self.missing) > 10 else ''
        super().__init__(f'{len(self.missing)} missing day(s): {shown}{more}')


class EmptyColumnError(PvYieldError):
    def __init__(self, column: int):
        self.column = column
        super().__init__(f'irradiance column {column} is empty')
