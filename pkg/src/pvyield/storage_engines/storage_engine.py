import asyncio
from abc import abstractmethod, ABC
from typing import Dict, List

from ..exceptions import MissingInputError
from ..structs import Config, OutputFile


class StorageEngine(ABC):
    """
    Where pipeline outputs go. Stages save their tables through an engine and read their predecessors' tables back
    from the same engine.

    Attributes:
        config (Config): The run configuration; engines read `out`, `bucket` and `region` from it.
    """

    def __init__(self, *, config: Config = None):
        self.config = config or {}

    @staticmethod
    def count_rows(name: str, data: bytes) -> int:
        """Data rows of a csv body, header excluded."""
        if not name.endswith('.csv') or not data:
            return 0
        return max(data.count(b'\n') - 1 + (not data.endswith(b'\n')), 0)

    @abstractmethod
    async def save(self, *, name: str, data: bytes) -> OutputFile:
        """Save data under name, replacing what was there."""

    @abstractmethod
    async def load(self, name: str) -> bytes:
        """
        Raises:
            MissingInputError: Nothing is stored under name.
        """

    async def exists(self, name: str) -> bool:
        try:
            await self.load(name)
            return True
        except MissingInputError:
            return False

    async def multi_save(self, *, outputs: Dict[str, bytes]) -> List[OutputFile]:
        """Save several outputs concurrently; results come back in the order of outputs."""
        return await asyncio.gather(*[self.save(name=name, data=data) for name, data in outputs.items()])
