from .storage_engine import StorageEngine
from .local_engine import LocalEngine
from .memory_engine import MemoryEngine
