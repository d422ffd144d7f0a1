"""Compact signed bearer tokens (JWS compact form, HMAC-SHA256 only).

The signature is checked over the raw ``header.claims`` bytes *before* the
segments are decoded: any bit flipped inside those segments therefore
surfaces as BadSignature, never as a decode error an attacker could probe.
``Malformed`` is reserved for tokens that lack a plausible signature segment
or whose segments fail to decode after the signature verified.

No function here reads a clock; callers always pass ``now``.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
import json
import secrets
from dataclasses import dataclass

from .errors import BadSignature, ExpiredToken, MalformedToken
from .rbac import RbacState, verify_credentials

ALLOWED_ALGS = frozenset({"HS256"})


@dataclass(frozen=True)
class Claims:
    sub: str
    roles: tuple[str, ...]
    iat: int
    exp: int
    jti: str


@dataclass(frozen=True)
class SigningKey:
    secret: bytes
    key_id: str = "default"

    def __post_init__(self):
        if len(self.secret) < 32:
            raise ValueError("signing secret must be at least 32 bytes")


def _b64url(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _b64url_decode(segment: str) -> bytes:
    pad = -len(segment) % 4
    return base64.urlsafe_b64decode(segment + "=" * pad)


def _sign(signing_input: bytes, key: SigningKey) -> bytes:
    return hmac.new(key.secret, signing_input, hashlib.sha256).digest()


def issue_token(username: str, password: str, now: int, ttl: int,
                key: SigningKey, accounts: RbacState) -> str:
    """Authenticate and mint a token; BadCredentials on any mismatch."""
    if ttl <= 0:
        raise ValueError("ttl must be positive")
    account = verify_credentials(accounts, username, password)
    header = {"alg": "HS256", "typ": "JWT", "kid": key.key_id}
    claims = {
        "sub": account.username,
        "roles": sorted(account.role_names),
        "iat": int(now),
        "exp": int(now) + int(ttl),
        "jti": secrets.token_hex(16),
    }
    signing_input = (
        _b64url(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        + "."
        + _b64url(json.dumps(claims, separators=(",", ":")).encode("utf-8"))
    ).encode("ascii")
    return signing_input.decode("ascii") + "." + _b64url(_sign(signing_input, key))


def verify_token(token: str, now: int, key: SigningKey, *, leeway: int = 0) -> Claims:
    """Verify structure, signature, then expiry; returns the claims."""
    if "." not in token:
        raise MalformedToken("expected compact three-segment form")
    signing_part, sig_segment = token.rsplit(".", 1)
    try:
        signature = _b64url_decode(sig_segment)
    except (binascii.Error, ValueError):
        raise MalformedToken("signature segment is not base64url") from None
    if len(signature) != hashlib.sha256().digest_size:
        raise MalformedToken("signature has wrong length")
    # total encoding: tampered bytes must surface as a MAC mismatch, not a codec error
    expected = _sign(signing_part.encode("utf-8", errors="surrogatepass"), key)
    if not hmac.compare_digest(signature, expected):
        raise BadSignature("signature mismatch")

    parts = signing_part.split(".")
    if len(parts) != 2:
        raise MalformedToken("expected compact three-segment form")
    try:
        header = json.loads(_b64url_decode(parts[0]))
        payload = json.loads(_b64url_decode(parts[1]))
    except (binascii.Error, ValueError):
        raise MalformedToken("undecodable header or claims") from None

    if not isinstance(header, dict) or header.get("alg") not in ALLOWED_ALGS:
        raise BadSignature(f"algorithm {header.get('alg')!r} not allowed")
    try:
        claims = Claims(
            sub=str(payload["sub"]),
            roles=tuple(str(r) for r in payload["roles"]),
            iat=int(payload["iat"]),
            exp=int(payload["exp"]),
            jti=str(payload["jti"]),
        )
    except (KeyError, TypeError, ValueError):
        raise MalformedToken("missing or mistyped claim") from None
    if not claims.roles:
        raise MalformedToken("roles claim is empty")

    if int(now) >= claims.exp + leeway:
        raise ExpiredToken("token expired")
    return claims
