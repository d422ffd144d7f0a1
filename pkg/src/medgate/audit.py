"""Append-only, hash-chained activity log.

Each entry's SHA-256 digest covers its fields plus the previous entry's
digest, so modification, deletion, or reordering of persisted entries is
detectable afterwards. Storage is one JSON record per line.

Verification walks the file in order and authenticates each entry at the
moment the *next* entry links to it (plus a final self-check on the last
entry). A content flip in entry k is therefore reported at k+1 — the seq
where the chain to the corrupted entry breaks — while structural damage
(unparseable line, seq gap, dangling prev link) is reported at k itself.

Appends are serialized through a single writer lock and flushed to disk
before the triggering request is allowed to complete.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import IoFailure

ZERO_HASH = bytes(32)

ACTIONS = frozenset({
    "auth_success", "auth_failure", "catalog_view", "query_execute",
    "query_denied", "input_blocked", "token_rejected",
})

OUTCOMES = frozenset({"ok", "error"})


@dataclass(frozen=True)
class AuditEntry:
    seq: int
    timestamp: int  # milliseconds since epoch
    principal: str
    jti: str
    action: str
    detail: str
    outcome: str
    prev_hash: bytes
    entry_hash: bytes


def _canonical_bytes(seq: int, timestamp: int, principal: str, jti: str,
                     action: str, detail: str, outcome: str, prev_hash: bytes) -> bytes:
    # length-prefixed UTF-8 fields in declaration order, then the raw prev hash
    out = bytearray()
    for text in (str(seq), str(timestamp), principal, jti, action, detail, outcome):
        raw = text.encode("utf-8")
        out += len(raw).to_bytes(4, "big")
        out += raw
    out += prev_hash
    return bytes(out)


def compute_entry_hash(seq: int, timestamp: int, principal: str, jti: str,
                       action: str, detail: str, outcome: str, prev_hash: bytes) -> bytes:
    return hashlib.sha256(
        _canonical_bytes(seq, timestamp, principal, jti, action, detail, outcome, prev_hash)
    ).digest()


def _entry_to_line(e: AuditEntry) -> str:
    doc = {
        "seq": e.seq,
        "timestamp": e.timestamp,
        "principal": e.principal,
        "jti": e.jti,
        "action": e.action,
        "detail": e.detail,
        "outcome": e.outcome,
        "prev_hash": e.prev_hash.hex(),
        "entry_hash": e.entry_hash.hex(),
    }
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def _hex32(text: str) -> bytes:
    # canonical form only: case-insensitive hex would let single-bit flips
    # (0x20 on a hex letter) slip past verification
    if not isinstance(text, str) or not re.fullmatch(r"[0-9a-f]{64}", text):
        raise ValueError("hash fields must be 64 lowercase hex chars")
    return bytes.fromhex(text)


def _line_to_entry(line: str) -> AuditEntry:
    doc = json.loads(line)
    prev_hash = _hex32(doc["prev_hash"])
    entry_hash = _hex32(doc["entry_hash"])
    return AuditEntry(
        seq=int(doc["seq"]),
        timestamp=int(doc["timestamp"]),
        principal=str(doc["principal"]),
        jti=str(doc["jti"]),
        action=str(doc["action"]),
        detail=str(doc["detail"]),
        outcome=str(doc["outcome"]),
        prev_hash=prev_hash,
        entry_hash=entry_hash,
    )


def _recomputed(e: AuditEntry) -> bytes:
    return compute_entry_hash(
        e.seq, e.timestamp, e.principal, e.jti, e.action, e.detail, e.outcome, e.prev_hash
    )


class AuditLog:
    """Single-writer append log over one file."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._seq = 0
        self._last_hash = ZERO_HASH
        if self.path.is_file():
            entries = self.read_entries()
            if entries:
                self._seq = entries[-1].seq
                self._last_hash = entries[-1].entry_hash

    def append(self, *, timestamp: int, principal: str, jti: str, action: str,
               detail: str, outcome: str) -> AuditEntry:
        if action not in ACTIONS:
            raise ValueError(f"unknown action {action!r}")
        if outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {outcome!r}")
        with self._lock:
            seq = self._seq + 1
            prev_hash = self._last_hash
            entry_hash = compute_entry_hash(
                seq, timestamp, principal, jti, action, detail, outcome, prev_hash
            )
            entry = AuditEntry(
                seq=seq, timestamp=timestamp, principal=principal, jti=jti,
                action=action, detail=detail, outcome=outcome,
                prev_hash=prev_hash, entry_hash=entry_hash,
            )
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(_entry_to_line(entry) + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise IoFailure(f"cannot append to {self.path}: {exc}") from exc
            self._seq = seq
            self._last_hash = entry_hash
            return entry

    def read_entries(self) -> list[AuditEntry]:
        try:
            raw = self.path.read_bytes()
        except FileNotFoundError:
            return []
        except OSError as exc:
            raise IoFailure(f"cannot read {self.path}: {exc}") from exc
        entries = []
        for line in raw.splitlines():
            entries.append(_line_to_entry(line.decode("utf-8")))
        return entries

    def tail(self, n: int) -> list[AuditEntry]:
        return self.read_entries()[-n:]

    def verify_chain(self) -> int | None:
        """Return the first broken seq, or None when the chain is intact."""
        return verify_file(self.path)


def verify_file(path: str | os.PathLike) -> int | None:
    """Walk the persisted chain; first broken seq, or None when intact."""
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        return None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    lines = raw.splitlines()
    prev: AuditEntry | None = None
    for position, line in enumerate(lines, start=1):
        try:
            entry = _line_to_entry(line.decode("utf-8"))
        except (ValueError, UnicodeDecodeError, KeyError, TypeError):
            return position
        if entry.seq != position:
            return position
        if prev is None:
            if entry.prev_hash != ZERO_HASH:
                return position
        else:
            if entry.prev_hash != prev.entry_hash:
                return position
            if prev.entry_hash != _recomputed(prev):
                return position
        prev = entry
    if prev is not None and prev.entry_hash != _recomputed(prev):
        return prev.seq
    return None
