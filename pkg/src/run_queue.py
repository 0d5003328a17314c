# src/run_queue.py
"""
DynSC - Run Queue
The Redis connection and RQ queue shared by batch sweeps. The run cache
reads and writes through the same client; workers drain the queue. Values
stay raw bytes because RQ pickles job payloads.
"""

import logging
from typing import Any, Callable, Dict, Optional, Sequence

import redis
from redis.exceptions import RedisError
from rq import Queue
from rq.job import Job, JobStatus
from rq.registry import FailedJobRegistry, StartedJobRegistry

from config import QUEUE_NAME, REDIS_URL

logger = logging.getLogger(__name__)

JOB_TIMEOUT = 6 * 3600
RESULT_TTL = 7 * 24 * 3600
DONE_STATUSES = (JobStatus.FINISHED, JobStatus.FAILED, JobStatus.CANCELED, JobStatus.STOPPED)


def describe_run(config: Dict[str, Any]) -> str:
    """Short job description: algo, mode and stream of a run config."""
    return f"{config.get('algo', 'dynamic')} {config.get('mode', 'er')} {config.get('stream')}"


class RunQueue:
    """
    Redis client plus the queue of harness runs.
    """

    def __init__(self, redis_url: str = REDIS_URL, queue_name: str = QUEUE_NAME):
        self.redis_url = redis_url
        self.queue_name = queue_name
        self.client: Optional[redis.Redis] = None
        self.queue: Optional[Queue] = None

    def connect(self) -> bool:
        """
        Open a client on redis_url and the run queue on it.

        Returns:
            bool: True if the server answered a ping
        """
        try:
            client = redis.Redis.from_url(self.redis_url, socket_timeout=5, socket_connect_timeout=5,
                                          retry_on_timeout=True, health_check_interval=30)
            client.ping()
        except RedisError as e:
            logger.error(f"Failed to connect to Redis at {self.redis_url}: {e}")
            return False
        self.attach(client)
        logger.info(f"Run queue {self.queue_name} ready")
        return True

    def attach(self, client: redis.Redis, is_async: bool = True):
        """Adopt an existing client (fakeredis in tests); is_async=False runs jobs at enqueue time."""
        self.client = client
        self.queue = Queue(self.queue_name, connection=client, is_async=is_async)

    def disconnect(self):
        if self.client is not None:
            try:
                self.client.close()
            except RedisError as e:
                logger.warning(f"Error closing Redis connection: {e}")
        self.client = None
        self.queue = None

    @property
    def is_connected(self) -> bool:
        if self.client is None:
            return False
        try:
            return bool(self.client.ping())
        except RedisError as e:
            logger.warning(f"Redis ping failed: {e}")
            return False

    def submit(self, func: Callable[[Dict[str, Any]], str], config: Dict[str, Any]) -> Optional[str]:
        """Enqueue func(config); None when no queue is open."""
        if self.queue is None:
            return None
        job = self.queue.enqueue(func, dict(config), job_timeout=JOB_TIMEOUT, result_ttl=RESULT_TTL,
                                 description=describe_run(config))
        logger.debug(f"Enqueued job {job.id}: {job.description}")
        return job.id

    def fetch(self, job_ids: Sequence[str]) -> Dict[str, Optional[Job]]:
        """Jobs by id; ids unknown to Redis map to None."""
        jobs = Job.fetch_many(list(job_ids), connection=self.client)
        return dict(zip(job_ids, jobs))

    def health_check(self) -> Dict[str, Any]:
        health = {
            "connected": False,
            "queued_runs": 0,
            "running_runs": 0,
            "failed_runs": 0,
            "error": None
        }
        if self.client is None or self.queue is None:
            health["error"] = "No Redis client available"
            return health
        try:
            self.client.ping()
            health["connected"] = True
            health["queued_runs"] = len(self.queue)
            health["running_runs"] = len(StartedJobRegistry(queue=self.queue))
            health["failed_runs"] = len(FailedJobRegistry(queue=self.queue))
        except RedisError as e:
            health["error"] = f"Redis error: {e}"
        return health


run_queue = RunQueue()


def get_run_queue() -> RunQueue:
    return run_queue


def initialize_run_queue(max_retries: int = 3) -> bool:
    """Connect the shared run queue, retrying a few times."""
    for attempt in range(max_retries):
        if run_queue.connect():
            return True
        if attempt < max_retries - 1:
            logger.warning(f"Redis connection attempt {attempt + 1} failed, retrying...")
    logger.error("Redis unavailable after all retries")
    return False
