import asyncio
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Dict, Hashable, Optional

from mel_refine.config.settings import settings
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)


@dataclass
class CacheEntry:
    """Cached trial score with access metadata."""

    data: Any
    access_count: int = 0

    def mark_accessed(self) -> None:
        self.access_count += 1


class TrialCache:
    """LRU memo of objective results keyed by (objective name, parameter key)."""

    def __init__(self, max_entries: Optional[int] = None, enabled: Optional[bool] = None):
        self._cache: "OrderedDict[Hashable, CacheEntry]" = OrderedDict()
        self._lock = asyncio.Lock()
        self._max_entries = max_entries or settings.search.cache_max_entries
        self._enabled = settings.search.cache_enabled if enabled is None else enabled
        self._hits = 0
        self._misses = 0

    async def get(self, key: Hashable) -> Optional[Any]:
        """Get value from cache."""
        if not self._enabled:
            return None

        async with self._lock:
            entry = self._cache.get(key)
            if entry is None:
                self._misses += 1
                return None

            # Mark as accessed and move to end (most recently used)
            entry.mark_accessed()
            self._cache.move_to_end(key)
            self._hits += 1
            logger.debug(f"Cache hit: {key!r} (access_count: {entry.access_count})")
            return entry.data

    async def set(self, key: Hashable, value: Any) -> None:
        """Set value in cache."""
        if not self._enabled:
            return

        async with self._lock:
            self._cache[key] = CacheEntry(data=value)
            self._cache.move_to_end(key)
            if len(self._cache) > self._max_entries:
                lru_key, _ = self._cache.popitem(last=False)
                logger.debug(f"Evicted LRU cache entry: {lru_key!r}")

    async def clear(self) -> None:
        """Clear all cache entries."""
        async with self._lock:
            self._cache.clear()
            self._hits = self._misses = 0
            logger.info("Trial cache cleared")

    async def get_stats(self) -> Dict[str, Any]:
        """Get cache statistics."""
        async with self._lock:
            lookups = self._hits + self._misses
            return {
                "total_entries": len(self._cache),
                "hits": self._hits,
                "misses": self._misses,
                "hit_rate": self._hits / lookups if lookups else 0.0,
                "max_entries": self._max_entries,
                "enabled": self._enabled,
            }
