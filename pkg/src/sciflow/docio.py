"""Canonical document rendering.

All on-disk documents (graphs, perception fixtures, reports, statistics) are
UTF-8 JSON rendered through `canonical_bytes` so that value-equal documents
are byte-equal: keys keep construction order, floats carry at most six
decimal places, output is pure ASCII.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from .errors import DocumentParseError


def format_number(value: float) -> str:
    """Render a number with at most six decimal places, no trailing zeros."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers in documents")
    if isinstance(value, int):
        return str(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite number in document: {value!r}")
    text = f"{round(value, 6):.6f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def _render(value: Any, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return format_number(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=True)
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{inner}{_render(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(k), ensure_ascii=True)}: {_render(v, indent + 1)}"
            for k, v in value.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    raise TypeError(f"unsupported document value: {type(value).__name__}")


def canonical_bytes(document: dict[str, Any]) -> bytes:
    """Serialize a document tree to canonical UTF-8 bytes."""
    return (_render(document, 0) + "\n").encode("utf-8")


def load_document(data: bytes | str) -> dict[str, Any]:
    """Parse a JSON document, reporting syntax errors with line:col location."""
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DocumentParseError(exc.msg, location=f"{exc.lineno}:{exc.colno}") from exc
    if not isinstance(doc, dict):
        raise DocumentParseError("document root must be an object")
    return doc


def read_document(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DocumentParseError(str(exc), location=str(path)) from exc
    try:
        return load_document(raw)
    except DocumentParseError as exc:
        raise DocumentParseError(str(exc), location=str(path)) from None


def write_document(path: str | Path, document: dict[str, Any]) -> None:
    Path(path).write_bytes(canonical_bytes(document))
