# busyq/telemetry/tracing.py
from __future__ import annotations
import contextvars
import logging
import os
from contextlib import contextmanager
from typing import Any, Iterator, Optional

from busyq import config

try:
    # v3 SDK
    from langfuse import Langfuse, get_client  # type: ignore
except Exception:
    Langfuse = None  # type: ignore
    def get_client():  # type: ignore
        return None

logger = logging.getLogger(__name__)

_current_client: contextvars.ContextVar[Any] = contextvars.ContextVar("lf_client", default=None)
_initialized = False
_last_error: Optional[str] = None


def _init_client() -> Any:
    """Init once; return client or None. Safe if pkg/envs missing or tracing is off."""
    global _initialized, _last_error
    if _initialized:
        return _current_client.get()
    _initialized = True

    if not config.TRACING:
        _last_error = "tracing disabled (BUSYQ_TRACING unset)"
        return None
    if Langfuse is None:
        _last_error = "langfuse package not installed"
        logger.debug("[langfuse] package missing; no-op mode")
        return None

    try:
        client = get_client()
        _current_client.set(client)
        if client:
            logger.debug("[langfuse] initialized")
        return client
    except Exception as e:
        _last_error = f"init failed: {type(e).__name__}: {e}"
        logger.debug("[langfuse] %s", _last_error)
        _current_client.set(None)
        return None


def get_current_trace() -> Any:
    """The langfuse client, or None in no-op mode."""
    if _current_client.get() is None:
        _init_client()
    return _current_client.get()


def set_current_trace(client: Any):
    """Store the client in a contextvar so nested code can start spans."""
    return _current_client.set(client)


def reset_current_trace(token) -> None:
    try:
        _current_client.reset(token)
    except Exception:
        pass


@contextmanager
def span(name: str, input: Any = None) -> Iterator[Any]:
    """Child span around a stage; yields the span or None. Never raises on tracing errors."""
    client = get_current_trace()
    sp = None
    if client is not None:
        try:
            sp = client.start_span(name=name, input=input)
        except Exception as e:
            logger.debug("[langfuse] start_span(%s) failed: %s", name, e)
            sp = None
    try:
        yield sp
    except Exception as e:
        if sp is not None:
            try:
                sp.update(output={"error": str(e)})
                sp.end()
            except Exception:
                pass
            sp = None
        raise
    finally:
        if sp is not None:
            try:
                sp.end()
            except Exception:
                pass


def flush() -> None:
    client = _current_client.get()
    if client is not None and hasattr(client, "flush"):
        try:
            client.flush()
        except Exception:
            pass


# ---------- Diagnostics ----------

def diagnostics() -> dict:
    _init_client()
    client = get_current_trace()
    return {
        "enabled": config.TRACING,
        "installed": Langfuse is not None,
        "client_ready": client is not None,
        "last_error": _last_error,
        "env": {
            "LANGFUSE_PUBLIC_KEY": bool(os.getenv("LANGFUSE_PUBLIC_KEY")),
            "LANGFUSE_SECRET_KEY": bool(os.getenv("LANGFUSE_SECRET_KEY")),
            "LANGFUSE_HOST": os.getenv("LANGFUSE_HOST"),
        },
    }
