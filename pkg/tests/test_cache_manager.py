# tests/test_cache_manager.py
import pytest

from cache_manager import RunCacheManager, file_digest, get_run_cache_manager
from run_queue import get_run_queue


@pytest.fixture
def run_config(graph_files):
    graph_path, stream_path = graph_files
    return {"graph": graph_path, "stream": stream_path, "algo": "recompute", "seed": 1}


class TestCacheKey:

    def test_digest_follows_content(self, tmp_path):
        path = tmp_path / "f.txt"
        path.write_text("3 0 unweighted\n")
        first = file_digest(str(path))
        assert file_digest(str(path)) == first
        path.write_text("4 0 unweighted\n")
        assert file_digest(str(path)) != first

    def test_out_is_not_keyed(self, run_config):
        cache = RunCacheManager()
        assert cache.cache_key(run_config) == cache.cache_key({**run_config, "out": "/tmp/x.csv"})
        assert cache.cache_key(run_config).startswith("dynsc_run:")

    def test_key_changes_with_config_and_files(self, run_config):
        cache = RunCacheManager()
        key = cache.cache_key(run_config)
        assert cache.cache_key({**run_config, "seed": 2}) != key
        with open(run_config["stream"], 'a', encoding='utf-8') as f:
            f.write("Q 0 1\n")
        assert cache.cache_key(run_config) != key

    def test_global_instance(self):
        assert get_run_cache_manager() is get_run_cache_manager()


class TestCacheOperations:

    def test_miss_then_hit(self, fake_redis, run_config):
        cache = get_run_cache_manager()
        assert cache.get(run_config) == (None, {})
        assert cache.set(run_config, "# dynsc-csv v1\nop\n", {"exit_code": 0})
        csv_text, metadata = cache.get(run_config)
        assert csv_text == "# dynsc-csv v1\nop\n"
        assert metadata["exit_code"] == 0
        assert "cached_at" in metadata
        stats = cache.get_stats()
        assert stats["hits"] == 1 and stats["misses"] == 1
        assert stats["hit_rate"] == 0.5
        assert stats["redis_connected"] is True

    def test_ttl_applied(self, fake_redis, run_config):
        cache = get_run_cache_manager()
        cache.set(run_config, "csv", ttl=120)
        ttl = fake_redis.ttl(cache.cache_key(run_config))
        assert 0 < ttl <= 120

    def test_empty_csv_not_cached(self, fake_redis, run_config):
        assert get_run_cache_manager().set(run_config, "") is False

    def test_delete_and_clear(self, fake_redis, run_config):
        cache = get_run_cache_manager()
        cache.set(run_config, "a")
        cache.set({**run_config, "seed": 9}, "b")
        assert cache.delete(run_config) is True
        assert cache.delete(run_config) is False
        fake_redis.set("unrelated", "keep")
        assert cache.clear_all() is True
        assert list(fake_redis.scan_iter(match="dynsc_run:*")) == []
        assert fake_redis.get("unrelated") == b"keep"

    def test_corrupt_entry_is_a_miss(self, fake_redis, run_config):
        cache = get_run_cache_manager()
        fake_redis.set(cache.cache_key(run_config), b"not json")
        assert cache.get(run_config) == (None, {})

    def test_disconnected(self, run_config):
        get_run_queue().disconnect()
        cache = RunCacheManager()
        assert cache.get(run_config) == (None, {})
        assert cache.set(run_config, "csv") is False
        assert cache.delete(run_config) is False
        assert cache.clear_all() is False
        assert cache.get_stats()["redis_connected"] is False
