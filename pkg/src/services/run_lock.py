from __future__ import annotations

import logging
import os
from pathlib import Path

import psutil

from src.errors import RunLockedError

logger = logging.getLogger(__name__)

LOCK_NAME = ".lock"


class RunLock:
    """Single-owner guard for a run directory, held through a pid file."""

    def __init__(self, run_dir: Path) -> None:
        self.path = Path(run_dir) / LOCK_NAME
        self._held = False

    @property
    def held(self) -> bool:
        return self._held

    def _owner(self) -> int | None:
        try:
            return int(self.path.read_text(encoding="utf-8").strip() or 0) or None
        except (OSError, ValueError):
            return None

    def _create(self) -> bool:
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            return False
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(str(os.getpid()))
        return True

    def acquire(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self._create():
            self._held = True
            return
        owner = self._owner()
        if owner is not None and owner != os.getpid() and psutil.pid_exists(owner):
            raise RunLockedError(f"{self.path.parent} is in use by process {owner}")
        logger.warning("Taking over stale lock %s (pid %s)", self.path, owner)
        self.path.unlink(missing_ok=True)
        if not self._create():
            raise RunLockedError(f"{self.path.parent} was locked by another process during takeover")
        self._held = True

    def release(self) -> None:
        if not self._held:
            return
        try:
            if self._owner() == os.getpid():
                self.path.unlink()
        except OSError:
            logger.warning("Could not remove lock %s", self.path, exc_info=True)
        self._held = False

    def __enter__(self) -> RunLock:
        self.acquire()
        return self

    def __exit__(self, *exc) -> None:
        self.release()
