"""
Memory storage engine. Outputs are kept as bytes in a dict, useful in tests and when embedding the pipeline.
"""
from logging import getLogger
from typing import Dict

from .storage_engine import StorageEngine
from ..structs import OutputFile
from ..exceptions import MissingInputError

logger = getLogger(__name__)


class MemoryEngine(StorageEngine):
    """Memory storage engine.

    Attributes:
        files (dict[str, bytes]): Saved outputs by name.
    """

    def __init__(self, *, config=None):
        super().__init__(config=config)
        self.files: Dict[str, bytes] = {}

    async def save(self, *, name: str, data: bytes) -> OutputFile:
        self.files[name] = bytes(data)
        return OutputFile(name=name, size=len(data), rows=self.count_rows(name, data),
                          message=f'{name} saved successfully')

    async def load(self, name: str) -> bytes:
        try:
            return self.files[name]
        except KeyError:
            raise MissingInputError(name) from None
