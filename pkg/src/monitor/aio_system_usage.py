import asyncio
import os
import time
from collections import deque
from typing import Optional

import psutil

from monitor import HISTORY_SIZE, ResourceSample, ResourceStats, SamplerUnavailable
from vre.logs import get_logger

logger = get_logger(__name__)


class AioSystemUsage:
    """Samples host CPU and memory (plus one process's CPU) on a fixed interval while a run is in flight."""

    def __init__(self, interval_ms: int = 1000, pid: Optional[int] = None, history_size=HISTORY_SIZE):
        self.interval_ms = interval_ms
        self.history_size = history_size

        # History Deques
        self.system_usage_history = deque(maxlen=history_size)

        try:
            self.process = psutil.Process(pid or os.getpid())
            # the first reading of cpu_percent is always 0; prime both counters
            psutil.cpu_percent(interval=None)
            self.process.cpu_percent(interval=None)
        except (psutil.Error, OSError) as ex:
            raise SamplerUnavailable(f"resource sampling unavailable: {ex}")

        self.t0 = time.monotonic()
        self.task_event_loop = None

    async def start(self):
        self.t0 = time.monotonic()
        self.task_event_loop = asyncio.create_task(self._event_loop())

    async def close(self):
        if self.task_event_loop:
            self.task_event_loop.cancel()
            self.task_event_loop = None
        # one last reading so short runs still get a sample
        self.sample()

    def sample(self) -> Optional[ResourceSample]:
        try:
            sample = ResourceSample(
                t_ms=(time.monotonic() - self.t0) * 1000,
                cpu_percent=psutil.cpu_percent(interval=None),
                mem_percent=psutil.virtual_memory().percent,
                process_cpu_percent=self.process.cpu_percent(interval=None),
            )
        except (psutil.Error, OSError) as ex:
            logger.warning(f"resource sample skipped: {ex}")
            return None
        self.system_usage_history.append(sample)
        return sample

    async def _event_loop(self):
        while True:
            await asyncio.sleep(self.interval_ms / 1000)
            self.sample()

    def stats(self) -> ResourceStats:
        return ResourceStats(list(self.system_usage_history))

