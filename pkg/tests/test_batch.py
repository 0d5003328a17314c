# tests/test_batch.py
import json

import pytest

from batch import BatchError, enqueue_run, enqueue_runs, execute_run_job, load_configs, summary_passed, wait_for_jobs
from cache_manager import get_run_cache_manager
from run_queue import get_run_queue


@pytest.fixture
def run_config(graph_files):
    graph_path, stream_path = graph_files
    return {"graph": graph_path, "stream": stream_path, "algo": "recompute", "oracle": True}


def _write(tmp_path, data):
    path = tmp_path / "configs.json"
    path.write_text(json.dumps(data))
    return str(path)


class TestLoadConfigs:

    def test_valid(self, tmp_path, run_config):
        assert load_configs(_write(tmp_path, [run_config, run_config])) == [run_config, run_config]

    @pytest.mark.parametrize("data", [
        {"graph": "g", "stream": "s"},
        [{"graph": "g", "stream": "s", "epsilon": 3.0}],
        [{"graph": "g", "stream": "s", "colour": "red"}],
        [{"graph": "g"}],
    ])
    def test_invalid(self, tmp_path, data):
        with pytest.raises(BatchError):
            load_configs(_write(tmp_path, data))


class TestExecuteRunJob:

    def test_runs_without_redis(self, run_config):
        get_run_queue().disconnect()
        assert summary_passed(execute_run_job(run_config))

    def test_second_run_hits_cache(self, fake_redis, run_config, tmp_path):
        out = tmp_path / "out.csv"
        config = {**run_config, "out": str(out)}
        first = execute_run_job(config)
        assert out.read_text() == first
        out.unlink()
        second = execute_run_job(config)
        assert second == first
        assert out.read_text() == first
        assert get_run_cache_manager().get_stats()["hits"] == 1

    def test_summary_passed(self):
        header = "# dynsc-csv v1\nop,args,answer,exact,rel_err,pass,micros,ops_since_rebuild\n"
        assert summary_passed(header + "summary,ops=0,,,,1,5,0\n")
        assert not summary_passed(header + "summary,ops=1,0,,,0,5,5\n")
        assert not summary_passed(header)


class TestQueue:

    def test_enqueue_and_wait(self, fake_redis, run_config):
        job_ids = enqueue_runs([run_config, {**run_config, "seed": 3}])
        assert len(set(job_ids)) == 2
        results = wait_for_jobs(job_ids, timeout=5, poll_interval=0.01)
        for job_id in job_ids:
            assert results[job_id]["status"] == "finished"
            assert summary_passed(results[job_id]["result"])

    def test_jobs_describe_their_run(self, fake_redis, run_config):
        job_id = enqueue_run({**run_config, "mode": "er"})
        job = get_run_queue().fetch([job_id])[job_id]
        assert job.description == f"recompute er {run_config['stream']}"
        assert job.return_value().startswith("# dynsc-csv v1\n")

    def test_missing_job(self, fake_redis):
        results = wait_for_jobs(["does-not-exist"], timeout=1, poll_interval=0.01)
        assert results == {"does-not-exist": {"status": "missing", "result": None}}

    def test_no_queue(self, run_config):
        get_run_queue().disconnect()
        with pytest.raises(BatchError):
            enqueue_run(run_config)

    def test_wait_needs_connection(self):
        get_run_queue().disconnect()
        with pytest.raises(BatchError):
            wait_for_jobs(["x"])
