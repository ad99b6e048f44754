"""Iteration callbacks for the solver loop."""

import logging
import time

from ..solver import IterationCallback, IterationRecord

logger = logging.getLogger(__name__)

# Seconds between two progress lines of one run.
PROGRESS_INTERVAL_SECS = 5.0


def make_progress_callback(
    every_secs: float = PROGRESS_INTERVAL_SECS, label: str = "run"
) -> IterationCallback:
    """Callback that logs solver progress at most once per `every_secs`.

    The first and the terminal record are always logged at INFO; records in
    between are logged at DEBUG and throttled.

    Args:
      every_secs: minimum number of seconds between two throttled lines.
      label: prefix identifying the run in the log.
    """
    state = {"timer_start": None, "skipped": 0}

    def progress_callback(record: IterationRecord) -> None:
        now = time.monotonic()
        if state["timer_start"] is None or record.terminal:
            logger.info(
                "%s [k: %i, lambda: %.3e, xi: %.6f, skipped_lines: %i]",
                label, record.k, record.lam, record.xi, state["skipped"],
            )
            state["timer_start"] = now
            state["skipped"] = 0
            return

        elapsed_secs = now - state["timer_start"]
        if elapsed_secs < every_secs:
            state["skipped"] += 1
            return
        logger.debug(
            "%s [k: %i, lambda: %.3e, r: %.3e, nu: %.3e, elapsed_secs: %.1f]",
            label, record.k, record.lam, record.r, record.nu, elapsed_secs,
        )
        state["timer_start"] = now
        state["skipped"] = 0

    return progress_callback
