import json
import logging
import time
from contextlib import contextmanager
from typing import Iterator

from .config import settings


def configure_logging(level: str | None = None) -> None:
    # Minimal, structured logging via JSON messages for key events
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@contextmanager
def trial_timer(campaign: str, trial: int, seed: int) -> Iterator[dict]:
    """Time one campaign trial and log a JSON payload when it finishes.

    The yielded dict can be enriched by the caller (e.g. report counts);
    its contents are merged into the logged payload.
    """
    logger = logging.getLogger("imitlab.trial")
    start = time.perf_counter()
    extra: dict = {}

    try:
        yield extra
    except Exception:
        payload = {
            "campaign": campaign,
            "trial": trial,
            "seed": seed,
            "status": "error",
            "latency_ms": int((time.perf_counter() - start) * 1000),
        }
        logger.exception(json.dumps(payload))
        raise

    payload = {
        "campaign": campaign,
        "trial": trial,
        "seed": seed,
        "status": "ok",
        "latency_ms": int((time.perf_counter() - start) * 1000),
        **extra,
    }
    logger.info(json.dumps(payload))
