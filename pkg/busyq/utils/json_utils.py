from __future__ import annotations
import json
from pathlib import Path
from typing import Any, Mapping, Sequence, Type, TypeVar

from pydantic import BaseModel, ValidationError

from busyq.analysis.distributions import QueueModel
from busyq.analysis.network import NetworkModel
from busyq.errors import ModelValidationError

M = TypeVar("M", bound=BaseModel)

_SERVICE_KINDS = {"constant", "exponential", "beta-const", "beta-general", "empirical"}
_FAMILY_KINDS = {"beta-const", "beta-general"}


def pointer(loc: Sequence[Any]) -> str:
    """pydantic error location -> schema pointer, dropping union tags (e.g. 'beta-const')."""
    parts = [str(p) for p in loc if not (isinstance(p, str) and p in _SERVICE_KINDS)]
    return "/" + "/".join(parts) if parts else ""


def load_json(path: str | Path, *, field: str = "/model") -> Any:
    p = Path(path)
    if not p.is_file():
        raise ModelValidationError(f"file not found: {p}", code="FILE_NOT_FOUND", path=field)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelValidationError(f"{p}: invalid JSON at line {e.lineno}: {e.msg}", path=field) from e


def validate(model: Type[M], data: Any) -> M:
    """model_validate with pydantic errors turned into ModelValidationError."""
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ModelValidationError(
            f"invalid {model.__name__}: {first.get('msg')}", path=pointer(first.get("loc", ()))
        ) from e


def _queue_shape(data: Any) -> Any:
    # a bare beta-family fragment carries its own lambda
    if isinstance(data, Mapping) and data.get("kind") in _FAMILY_KINDS:
        return {"service": dict(data)}
    return data


def load_queue(path: str | Path) -> QueueModel:
    return validate(QueueModel, _queue_shape(load_json(path, field="/model")))


def load_network(path: str | Path) -> NetworkModel:
    return validate(NetworkModel, load_json(path, field="/net"))
