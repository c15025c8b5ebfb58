from __future__ import annotations
import logging
import os

from dotenv import load_dotenv

load_dotenv()

# ------------------------------------------------------------------
# Config
# ------------------------------------------------------------------
_TRUTHY = {"1", "true", "True", "YES", "yes"}


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        logging.getLogger(__name__).warning("ignoring non-integer %s=%r", name, raw)
        return default


THREADS = _int_env("BUSYQ_THREADS", min(8, os.cpu_count() or 1))
LOG_LEVEL = (os.getenv("BUSYQ_LOG_LEVEL") or "WARNING").strip().upper()
MOMENT_CAP = _int_env("BUSYQ_MOMENT_CAP", 10)
TRACING = os.getenv("BUSYQ_TRACING") in _TRUTHY


def threads() -> int:
    """Concurrency cap, re-read so tests and the CLI can override it at runtime."""
    return _int_env("BUSYQ_THREADS", THREADS)


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
