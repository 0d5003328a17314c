"""
DynSC - Batch Runs
Queue harness runs on RQ and collect their results. Each job replays one run
config (a RunConfig dict); finished CSVs are cached by content so rerunning a
sweep only replays configs whose inputs changed.
"""
import csv
import io
import json
import time
import logging
from typing import Any, Dict, List, Optional, Sequence

from rq.job import JobStatus

from cache_manager import get_run_cache_manager
from graph_core import DynSCError
from harness import RunConfig, run
from run_queue import DONE_STATUSES, get_run_queue

logger = logging.getLogger(__name__)


class BatchError(DynSCError):
    """The queue is unavailable or a batch file is malformed."""


def load_configs(path: str) -> List[Dict[str, Any]]:
    """A JSON list of run config objects; each is validated up front."""
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise BatchError(f"{path}: expected a JSON list of run configs")
    for i, item in enumerate(data):
        try:
            ok, issues = RunConfig.from_dict(item).validate()
        except (TypeError, ValueError) as e:
            raise BatchError(f"{path}: config {i}: {e}") from e
        if not ok:
            raise BatchError(f"{path}: config {i}: {'; '.join(issues)}")
    return data


def execute_run_job(config: Dict[str, Any]) -> str:
    """Worker entry point: replay one config and return its CSV, reusing a cached one when present."""
    cache = get_run_cache_manager()
    csv_text, _ = cache.get(config)
    if csv_text is None:
        result = run(RunConfig.from_dict(config))
        csv_text = result.csv_text
        cache.set(config, csv_text, {"exit_code": result.exit_code, "pass_rate": result.pass_rate,
                                     "total_micros": result.total_micros, "rebuilds": result.rebuilds})
        logger.info(f"Replayed {config.get('stream')} ({config.get('algo', 'dynamic')}), exit {result.exit_code}")
    else:
        logger.info(f"Cached result for {config.get('stream')} ({config.get('algo', 'dynamic')})")
        if config.get("out"):
            with open(config["out"], 'w', encoding='utf-8') as f:
                f.write(csv_text)
    return csv_text


def summary_passed(csv_text: str) -> bool:
    """Whether the summary row of a harness CSV reports a clean run."""
    rows = list(csv.DictReader(line for line in io.StringIO(csv_text) if not line.startswith("#")))
    return bool(rows) and rows[-1]["op"] == "summary" and rows[-1]["pass"] == "1"


def enqueue_run(config: Dict[str, Any]) -> str:
    job_id = get_run_queue().submit(execute_run_job, config)
    if job_id is None:
        raise BatchError("job queue unavailable; is Redis running?")
    return job_id


def enqueue_runs(configs: Sequence[Dict[str, Any]]) -> List[str]:
    """Enqueue one job per config and return the job ids in order."""
    job_ids = [enqueue_run(config) for config in configs]
    logger.info(f"Enqueued {len(job_ids)} runs")
    return job_ids


def wait_for_jobs(job_ids: Sequence[str], timeout: Optional[float] = None,
                  poll_interval: float = 1.0) -> Dict[str, Dict[str, Any]]:
    """
    Poll until every job has finished or failed (or timeout passes).

    Returns:
        job id -> {"status", "result"}; result is None unless finished
    """
    queue = get_run_queue()
    if queue.client is None:
        raise BatchError("Redis not connected")
    deadline = None if timeout is None else time.monotonic() + timeout
    while True:
        jobs = queue.fetch(job_ids)
        statuses = {jid: (job.get_status() if job is not None else None) for jid, job in jobs.items()}
        pending = [jid for jid, status in statuses.items() if status is not None and status not in DONE_STATUSES]
        if not pending or (deadline is not None and time.monotonic() >= deadline):
            break
        logger.debug(f"{len(pending)} of {len(job_ids)} runs pending")
        time.sleep(poll_interval)
    out = {}
    for jid, job in jobs.items():
        status = statuses[jid]
        result = job.return_value() if status == JobStatus.FINISHED else None
        out[jid] = {"status": status.value if status is not None else "missing", "result": result}
    return out
