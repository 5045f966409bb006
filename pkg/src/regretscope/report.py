"""Text tables, CSV files, graymap heatmaps and canonical JSON."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def fmt(x: float) -> str:
    """Three decimals, with no negative zero."""
    if isinstance(x, bool) or not isinstance(x, (int, float, np.floating, np.integer)):
        return str(x)
    return f"{round(float(x), 3) + 0.0:.3f}"


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v} cannot be serialized")
        return v
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), (str, int)):
        return obj.value
    return obj


def dump_json(obj: Any) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def table(rows: Sequence[Sequence[Any]], headers: Sequence[str] | None = None) -> str:
    cells = [[fmt(c) if not isinstance(c, str) else c for c in r] for r in rows]
    if headers:
        cells.insert(0, list(headers))
    if not cells:
        return ""
    widths = [max(len(r[i]) for r in cells if i < len(r)) for i in range(max(len(r) for r in cells))]
    lines = []
    for k, r in enumerate(cells):
        parts = [c.ljust(widths[i]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r)]
        lines.append("  ".join(parts).rstrip())
        if k == 0 and headers:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(c)) if isinstance(c, (float, np.floating)) else c for c in r])
    return buf.getvalue()


def matrix_csv(labels: Sequence[str], m: np.ndarray) -> str:
    return csv_text(["label", *labels], ([lab, *row] for lab, row in zip(labels, np.asarray(m, dtype=float))))


def pgm_bytes(m: np.ndarray, cell: int = 16) -> bytes:
    """Binary graymap of ``m`` scaled to 0..255 (black = 0), ``cell`` pixels per entry."""
    m = np.asarray(m, dtype=float)
    top = float(m.max()) if m.size else 0.0
    scaled = np.zeros_like(m) if top <= 0 else m / top
    img = np.rint(255 * scaled).astype(np.uint8)
    img = np.kron(img, np.ones((cell, cell), dtype=np.uint8))
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode() + img.tobytes()


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_bytes(path: Path, data: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return path


def schema_path(name: str):
    """Bundled JSON schema, e.g. ``schema_path("report")``."""
    from importlib.resources import files

    return files("regretscope") / "schemas" / f"{name}.schema.json"


def data_path(name: str):
    """Bundled worked-example file, e.g. ``data_path("worked_train_env.json")``."""
    from importlib.resources import files

    return files("regretscope") / "data" / name
