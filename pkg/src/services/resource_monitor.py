from __future__ import annotations

import logging
import threading

import psutil

logger = logging.getLogger(__name__)


class ResourceMonitor(threading.Thread):
    """Logs process CPU% and resident memory at a fixed interval while a command runs."""

    def __init__(self, interval_s: float = 30.0) -> None:
        super().__init__(name="resource-monitor", daemon=True)
        self._interval_s = interval_s
        self._stop_event = threading.Event()
        self._process = psutil.Process()
        self.peak_rss = 0

    def sample(self) -> tuple[float, int]:
        cpu = self._process.cpu_percent(interval=None)
        rss = self._process.memory_info().rss
        self.peak_rss = max(self.peak_rss, rss)
        return cpu, rss

    def run(self) -> None:
        # First call primes cpu_percent
        self._process.cpu_percent(interval=None)

        while not self._stop_event.wait(self._interval_s):
            try:
                cpu, rss = self.sample()
                logger.info("cpu=%.0f%% rss=%.1f MiB", cpu, rss / 2**20)
            except Exception:
                logger.exception("Failed to collect resource stats")

    def stop(self) -> None:
        self._stop_event.set()
        if self.is_alive():
            self.join(timeout=3.0)
        if self.peak_rss:
            logger.info("Peak rss %.1f MiB", self.peak_rss / 2**20)
