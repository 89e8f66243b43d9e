"""Deterministic, atomic file output."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path


def fmt(x) -> str:
    """Fixed-precision float text so repeated runs produce identical bytes."""
    if isinstance(x, (bool,)):
        return "true" if x else "false"
    if isinstance(x, (int,)):
        return str(x)
    try:
        xf = float(x)
    except (TypeError, ValueError):
        return str(x)
    if xf != xf:
        return "nan"
    if xf in (float("inf"), float("-inf")):
        return "inf" if xf > 0 else "-inf"
    return f"{xf:.12g}"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(c) for c in r])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, csv_text(header, rows))


def _rounded(obj):
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    try:
        xf = float(obj)
    except (TypeError, ValueError):
        return str(obj)
    if xf != xf or xf in (float("inf"), float("-inf")):
        return fmt(xf)
    return float(f"{xf:.12g}")


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(_rounded(obj), indent=2, sort_keys=True) + "\n")


def write_plot_data(path, header: str, x, y) -> None:
    lines = [f"# {header}"]
    lines += [f"{fmt(a)} {fmt(b)}" for a, b in zip(x, y)]
    atomic_write_text(path, "\n".join(lines) + "\n")
