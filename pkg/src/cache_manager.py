# src/cache_manager.py
"""
DynSC - Run Result Cache
Caches harness CSV output in Redis, keyed by the run configuration and the
content of every input file it reads. A replay is fully determined by that
key (all randomness derives from the seed), so a cache hit is exactly the
CSV a fresh run would produce. The output path is not part of the key.
"""

import hashlib
import json
import time
import logging
from typing import Optional, Dict, Any, Tuple

from config import CACHE_TTL
from run_queue import get_run_queue

logger = logging.getLogger(__name__)

# Fields that do not influence the CSV
_UNKEYED = ("out",)
_INPUT_FILES = ("graph", "stream", "demand")


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunCacheManager:
    """
    Stores replay results (CSV text plus summary metadata) under a content key.
    """

    def __init__(self, default_ttl: int = CACHE_TTL):
        """
        Args:
            default_ttl: Default time-to-live for cache entries in seconds
        """
        self.default_ttl = default_ttl
        self.runs = get_run_queue()
        self.cache_prefix = "dynsc_run:"
        self.hit_count = 0
        self.miss_count = 0

    def cache_key(self, config: Dict[str, Any]) -> str:
        """
        Key for a run config dict: sha256 over the canonical JSON of the
        keyed fields and the digests of the files it names.
        """
        keyed = {k: v for k, v in sorted(config.items()) if k not in _UNKEYED}
        digests = {name: file_digest(config[name]) for name in _INPUT_FILES if config.get(name)}
        payload = json.dumps({"config": keyed, "files": digests}, sort_keys=True, separators=(",", ":"))
        return self.cache_prefix + hashlib.sha256(payload.encode('utf-8')).hexdigest()

    def _serialize(self, csv_text: str, metadata: Dict[str, Any]) -> str:
        return json.dumps({
            "csv": csv_text,
            "metadata": metadata,
            "cached_at": time.time(),
            "version": "1.0"
        })

    def _deserialize(self, cached: bytes) -> Tuple[str, Dict[str, Any]]:
        try:
            data = json.loads(cached)
            metadata = data.get("metadata", {})
            metadata["cached_at"] = data.get("cached_at", 0)
            return data.get("csv", ""), metadata
        except (json.JSONDecodeError, UnicodeDecodeError, TypeError) as e:
            logger.warning(f"Failed to deserialize cached run: {e}")
            return "", {}

    def get(self, config: Dict[str, Any]) -> Tuple[Optional[str], Dict[str, Any]]:
        """
        Returns:
            Tuple of (csv_text, metadata) or (None, {}) if not cached
        """
        if not self.runs.is_connected:
            logger.debug("Redis not connected, skipping cache get")
            return None, {}
        key = self.cache_key(config)
        try:
            cached = self.runs.client.get(key)
            if cached:
                csv_text, metadata = self._deserialize(cached)
                if csv_text:
                    self.hit_count += 1
                    logger.debug(f"Cache hit for key: {key}")
                    return csv_text, metadata
            self.miss_count += 1
            logger.debug(f"Cache miss for key: {key}")
            return None, {}
        except Exception as e:
            logger.warning(f"Cache get error: {e}")
            return None, {}

    def set(self, config: Dict[str, Any], csv_text: str, metadata: Optional[Dict[str, Any]] = None,
            ttl: Optional[int] = None) -> bool:
        if not self.runs.is_connected:
            logger.debug("Redis not connected, skipping cache set")
            return False
        if not csv_text:
            logger.debug("Empty CSV, not caching")
            return False
        key = self.cache_key(config)
        try:
            stored = self.runs.client.setex(key, ttl if ttl is not None else self.default_ttl,
                                                 self._serialize(csv_text, metadata or {}))
            if stored:
                logger.debug(f"Cached run for key: {key}")
            return bool(stored)
        except Exception as e:
            logger.warning(f"Cache set error: {e}")
            return False

    def delete(self, config: Dict[str, Any]) -> bool:
        if not self.runs.is_connected:
            return False
        try:
            return bool(self.runs.client.delete(self.cache_key(config)))
        except Exception as e:
            logger.warning(f"Cache delete error: {e}")
            return False

    def clear_all(self) -> bool:
        """Remove every cached run."""
        if not self.runs.is_connected:
            logger.debug("Redis not connected, skipping cache clear")
            return False
        try:
            keys = list(self.runs.client.scan_iter(match=f"{self.cache_prefix}*"))
            if keys:
                removed = self.runs.client.delete(*keys)
                logger.info(f"Cleared {removed} cached runs")
            return True
        except Exception as e:
            logger.error(f"Cache clear error: {e}")
            return False

    def get_stats(self) -> Dict[str, Any]:
        total = self.hit_count + self.miss_count
        return {
            "hits": self.hit_count,
            "misses": self.miss_count,
            "hit_rate": self.hit_count / total if total else 0.0,
            "total_requests": total,
            "redis_connected": self.runs.is_connected
        }


# Global cache manager instance
run_cache_manager = RunCacheManager()


def get_run_cache_manager() -> RunCacheManager:
    """Get the global run cache manager instance."""
    return run_cache_manager
