import logging
from collections import OrderedDict
from pathlib import Path
from threading import Lock
from typing import Any, Dict, Tuple

from services.dsl_parser import load_model
from services.irvo_model import IrvoModel

logger = logging.getLogger(__name__)


class ModelCache:
    """In-memory LRU of parsed model files, keyed by path and modification time.

    Task trees often link the same diagram from several tasks; each file is
    parsed once per run.
    """

    def __init__(self, max_entries: int = 128):
        self.max_entries = max_entries
        self._cache: "OrderedDict[Tuple[str, int], IrvoModel]" = OrderedDict()
        self._lock = Lock()
        self._hits = 0
        self._misses = 0

    def _key(self, path: Path) -> Tuple[str, int]:
        resolved = Path(path).resolve()
        return str(resolved), resolved.stat().st_mtime_ns

    def load(self, path: Path) -> IrvoModel:
        key = self._key(path)
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                self._hits += 1
                logger.debug(f"Cache hit: {key[0]}")
                return self._cache[key]
            self._misses += 1

        model = load_model(path)
        with self._lock:
            self._cache[key] = model
            self._cache.move_to_end(key)
            while len(self._cache) > self.max_entries:
                evicted, _ = self._cache.popitem(last=False)
                logger.debug(f"Cache evict: {evicted[0]}")
        logger.debug(f"Cache set: {key[0]}")
        return model

    def stats(self) -> Dict[str, Any]:
        requests = self._hits + self._misses
        return {
            "entry_count": len(self._cache),
            "max_entries": self.max_entries,
            "hit_rate": self._hits / max(requests, 1),
        }
