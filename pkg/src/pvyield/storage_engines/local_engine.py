"""
This module contains the LocalEngine class.
"""
from pathlib import Path
from logging import getLogger

from ..exceptions import MissingInputError, PvYieldError
from ..structs import OutputFile
from .storage_engine import StorageEngine

logger = getLogger(__name__)


class LocalEngine(StorageEngine):
    """Writes outputs as files below the `out` directory."""

    @property
    def root(self) -> Path:
        root = Path(self.config.get('out') or 'out')
        return root if root.is_absolute() else Path.cwd() / root

    def get_path(self, name: str) -> Path:
        """Get the path to save the output to, creating its directory.

        Returns:
            Path: The path to save the output to.
        """
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    async def save(self, *, name: str, data: bytes) -> OutputFile:
        """Write data to `out/name`.

        Args:
            name (str): Output name, may contain sub directories.
            data (bytes): File body.

        Returns:
            OutputFile: The saved output.
        """
        try:
            dest = self.get_path(name)
            with open(dest, 'wb') as fh:
                fh.write(data)
            return OutputFile(name=name, path=str(dest), size=len(data), rows=self.count_rows(name, data),
                              message=f'{name} was saved successfully')
        except OSError as err:
            logger.error(f'Error saving output: {err} in {self.__class__.__name__}')
            raise PvYieldError(f'cannot write {name}: {err}') from err

    async def load(self, name: str) -> bytes:
        path = self.root / name
        try:
            with open(path, 'rb') as fh:
                return fh.read()
        except OSError as err:
            raise MissingInputError(path) from err
