"""Per-service configuration: a flat key=value file with env overrides.

Format: one ``key = value`` pair per line, ``#`` comments, blank lines
ignored. ``MEDGATE_LISTEN_ADDRESS``, ``MEDGATE_SIGNING_SECRET_PATH`` and
``MEDGATE_PEER_SECRET_PATH`` override their file counterparts.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .guard import DEFAULT_ANTI_INJECTION, DEFAULT_BLOCKLIST, GuardConfig
from .records import parse_iso_date
from .tokens import SigningKey

SERVICE_KINDS = ("auth", "catalog", "health_record", "medical_record", "log")

_PEER_KEYS = ("auth_url", "catalog_url", "health_record_url", "medical_record_url", "log_url")


@dataclass(frozen=True)
class ServiceConfig:
    service_kind: str
    listen_address: str
    peer_addresses: dict = field(default_factory=dict)  # kind -> base URL
    data_dir: str = ""
    rbac_path: str = ""
    signing_secret_path: str = ""
    peer_secret_path: str = ""
    audit_log_path: str = ""
    token_ttl_seconds: int = 900
    token_leeway_seconds: int = 0
    reference_date: date = date(2018, 1, 1)
    blocklist: frozenset = DEFAULT_BLOCKLIST
    anti_injection: tuple = DEFAULT_ANTI_INJECTION

    @property
    def host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])

    def guard_config(self) -> GuardConfig:
        return GuardConfig(blocklist=self.blocklist, anti_injection=self.anti_injection)


def _parse_pairs(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def _validate(cfg: ServiceConfig) -> ServiceConfig:
    if cfg.service_kind not in SERVICE_KINDS:
        raise ValueError(f"unknown service kind {cfg.service_kind!r}")
    host, sep, port = cfg.listen_address.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ValueError(f"listen_address must be host:port, got {cfg.listen_address!r}")

    def need(attr: str):
        if not getattr(cfg, attr):
            raise ValueError(f"{cfg.service_kind} service requires {attr}")

    if cfg.service_kind == "log":
        need("audit_log_path")
        need("peer_secret_path")
        return cfg
    if "log" not in cfg.peer_addresses:
        raise ValueError(f"{cfg.service_kind} service requires log_url")
    need("signing_secret_path")
    need("peer_secret_path")
    need("rbac_path")
    if cfg.service_kind == "catalog":
        if "auth" not in cfg.peer_addresses:
            raise ValueError("catalog service requires auth_url")
    if cfg.service_kind in ("health_record", "medical_record"):
        need("data_dir")
    return cfg


def parse_config(text: str, kind_override: str | None = None) -> ServiceConfig:
    pairs = _parse_pairs(text)
    kind = pairs.get("kind", "")
    if kind_override:
        if kind and kind != kind_override:
            raise ValueError(f"config kind {kind!r} conflicts with requested {kind_override!r}")
        kind = kind_override
    peer_addresses = {}
    for key in _PEER_KEYS:
        if key in pairs:
            peer_addresses[key[: -len("_url")]] = pairs[key].rstrip("/")

    listen = os.environ.get("MEDGATE_LISTEN_ADDRESS") or pairs.get("listen_address", "")
    signing = os.environ.get("MEDGATE_SIGNING_SECRET_PATH") or pairs.get("signing_secret_path", "")
    peer_secret = os.environ.get("MEDGATE_PEER_SECRET_PATH") or pairs.get("peer_secret_path", "")

    blocklist = DEFAULT_BLOCKLIST
    if "blocklist" in pairs:
        blocklist = frozenset(t.strip() for t in pairs["blocklist"].split(",") if t.strip())
    anti_injection = DEFAULT_ANTI_INJECTION
    if "anti_injection" in pairs:
        anti_injection = tuple(t.strip() for t in pairs["anti_injection"].split(",") if t.strip())

    cfg = ServiceConfig(
        service_kind=kind,
        listen_address=listen,
        peer_addresses=peer_addresses,
        data_dir=pairs.get("data_dir", ""),
        rbac_path=pairs.get("rbac_path", ""),
        signing_secret_path=signing,
        peer_secret_path=peer_secret,
        audit_log_path=pairs.get("audit_log_path", ""),
        token_ttl_seconds=int(pairs.get("token_ttl_seconds", "900")),
        token_leeway_seconds=int(pairs.get("token_leeway_seconds", "0")),
        reference_date=parse_iso_date(pairs.get("reference_date", "2018-01-01")),
        blocklist=blocklist,
        anti_injection=anti_injection,
    )
    return _validate(cfg)


def load_config(path: str | os.PathLike, kind_override: str | None = None) -> ServiceConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), kind_override)


def load_signing_key(path: str | os.PathLike) -> SigningKey:
    raw = Path(path).read_bytes().rstrip(b"\n")
    return SigningKey(secret=raw)


def load_peer_secret(path: str | os.PathLike) -> str:
    return Path(path).read_text(encoding="utf-8").strip()
