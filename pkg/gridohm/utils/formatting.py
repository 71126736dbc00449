"""Deterministic rendering of command results.

JSON floats carry 12 significant digits and text tables 6, so identical
requests print identical bytes.
"""

import csv
import io
import json
import math
from typing import Any, Dict, List, Sequence

from gridohm.exceptions import GridohmError

OUTPUT_FORMAT_VERSION = 1


def _round(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            return str(value)
        return float(f"{value:.12g}")
    if isinstance(value, dict):
        return {k: _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v) for v in value]
    return value


def render_json(payload: Dict[str, Any]) -> str:
    document = {"format": OUTPUT_FORMAT_VERSION}
    document.update(payload)
    return json.dumps(_round(document), indent=2, sort_keys=True, ensure_ascii=False)


def render_error(error: GridohmError) -> str:
    return render_json({"error": error.to_dict()})


def _cell(value: Any, digits: int) -> str:
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    return str(value)


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v, 12) for v in row])
    return buffer.getvalue().rstrip("\n")


def render_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells: List[List[str]] = [list(header)] + [[_cell(v, 6) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
