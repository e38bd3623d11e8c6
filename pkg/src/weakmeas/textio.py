"""Plain-text output conventions shared by tables, records and the CLI.

Numbers are written with 17 significant digits through ``format``, which
is locale-independent.  Metadata lines start with ``#``.
"""

from __future__ import annotations

import json
from typing import Iterable, Mapping, Sequence

from . import __version__


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def metadata_lines(meta: Mapping) -> list[str]:
    lines = [f"# weakmeas {__version__}"]
    for key, value in meta.items():
        lines.append(f"# {key}: {_meta_value(value)}")
    return lines


def _meta_value(value) -> str:
    if isinstance(value, float):
        return fmt(value)
    if isinstance(value, complex):
        return f"{fmt(value.real)}{'+' if value.imag >= 0 else '-'}{fmt(abs(value.imag))}j"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_meta_value(v) for v in value) + "]"
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True)
    return str(value)


def write_table(header: Sequence[str], rows: Iterable[Sequence[float]], meta: Mapping) -> str:
    """Render comma-separated rows below a metadata block and a header row."""
    out = metadata_lines(meta)
    out.append(",".join(header))
    for row in rows:
        out.append(",".join(fmt(v) for v in row))
    return "\n".join(out) + "\n"


def read_table(text: str) -> tuple[dict, list[str], list[list[float]]]:
    """Inverse of :func:`write_table` (metadata values stay strings)."""
    meta: dict[str, str] = {}
    header: list[str] = []
    rows: list[list[float]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ": " in body:
                k, v = body.split(": ", 1)
                meta[k] = v
            continue
        if not header:
            header = line.split(",")
            continue
        rows.append([float(v) for v in line.split(",")])
    return meta, header, rows
