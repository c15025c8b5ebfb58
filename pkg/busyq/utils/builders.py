from __future__ import annotations
import csv
import io
import json
import math
from typing import Any, Dict, Iterable, Sequence

import numpy as np

from busyq.schemas.run_schemas import ResultTable

SIG_DIGITS = 12


def fmt(x: Any) -> Any:
    """Fixed 12-significant-digit rendering for floats; other values pass through."""
    if isinstance(x, (complex, np.complexfloating)):
        return f"{fmt(x.real)}{'+' if x.imag >= 0 else '-'}{fmt(abs(x.imag))}j"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.{SIG_DIGITS}g}"
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def build_table(columns: Sequence[str], *cols: Iterable[Any], **meta: Any) -> ResultTable:
    rows = [list(r) for r in zip(*cols)]
    return ResultTable(columns=list(columns), rows=rows, meta=meta)


def render_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json_value(x: Any) -> Any:
    if isinstance(x, (float, np.floating)) and math.isfinite(float(x)):
        return float(fmt(x))
    return fmt(x)


def render_json(table: ResultTable) -> str:
    payload: Dict[str, Any] = {
        "columns": table.columns,
        "rows": [[_json_value(v) for v in row] for row in table.rows],
    }
    if table.meta:
        payload["meta"] = {k: _json_value(v) for k, v in table.meta.items()}
    return json.dumps(payload, indent=2) + "\n"


def render(table: ResultTable, out: str) -> str:
    return render_json(table) if out == "json" else render_csv(table)
