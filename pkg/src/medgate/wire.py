"""ResultSet serialization to the two wire formats.

XML is positional (no labels), JSON is labeled; both are byte-deterministic.
Integer aggregates are emitted as JSON numbers, not quoted strings, for
client usability.
"""

from __future__ import annotations

import json

from .errors import DuplicateColumnLabel
from .queries import ResultSet

XML_DECLARATION = '<?xml version="1.0" encoding="utf-8"?>'

CONTENT_TYPES = {"json": "application/json", "xml": "application/xml"}


def _escape_xml(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def to_xml(rs: ResultSet) -> bytes:
    parts = [XML_DECLARATION, "<dataset>"]
    for row in rs.rows:
        parts.append("<item>")
        for value in row:
            parts.append(f"<element>{_escape_xml(str(value))}</element>")
        parts.append("</item>")
    parts.append("</dataset>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def to_json(rs: ResultSet) -> bytes:
    if len(set(rs.columns)) != len(rs.columns):
        raise DuplicateColumnLabel(f"duplicate labels in {rs.columns}")
    objects = [dict(zip(rs.columns, row)) for row in rs.rows]
    return (json.dumps(objects, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def serialize(rs: ResultSet, fmt: str) -> bytes:
    if fmt == "xml":
        return to_xml(rs)
    if fmt == "json":
        return to_json(rs)
    raise ValueError(f"unknown format {fmt!r}")
