"""
DynSC - RQ Worker
Drains the harness queue (see batch.py). Start one worker per core for
parameter sweeps; every job is an independent replay.
"""
import logging
import sys
from typing import Optional

from dotenv import load_dotenv
from rq import Worker

load_dotenv()

from config import QUEUE_NAME
from run_queue import RunQueue, get_run_queue, initialize_run_queue

logger = logging.getLogger(__name__)


def create_worker(queue_name: str = QUEUE_NAME) -> Optional[Worker]:
    """
    Create an RQ worker for the named run queue on the shared connection.

    Returns:
        Worker instance or None if Redis is not connected
    """
    shared = get_run_queue()
    if not shared.is_connected:
        logger.error("Cannot create worker: Redis not connected")
        return None
    try:
        runs = RunQueue(queue_name=queue_name)
        runs.attach(shared.client)
        worker = Worker([runs.queue], connection=shared.client)
        logger.info(f"Worker created on queue {queue_name}")
        return worker
    except Exception as e:
        logger.error(f"Failed to create worker: {e}")
        return None


def main() -> int:
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    if not initialize_run_queue():
        logger.error("Redis initialization failed. Cannot start worker.")
        return 1
    worker = create_worker()
    if not worker:
        return 1
    try:
        worker.work()
    except KeyboardInterrupt:
        logger.info("Worker shutdown requested by user")
    except Exception as e:
        logger.error(f"Worker failed: {e}", exc_info=True)
        return 1
    finally:
        get_run_queue().disconnect()
        logger.info("Worker shutdown complete")
    return 0


if __name__ == '__main__':
    sys.exit(main())
