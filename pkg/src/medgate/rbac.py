"""Role-based access control: users, roles, role-to-query grants.

State is an immutable snapshot; administrative mutations return a new
snapshot and persist by atomically rewriting a single JSON file. Passwords
are stored only as salted PBKDF2-HMAC-SHA256 digests.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import secrets
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import BadCredentials, DuplicateUser, EmptyPassword, IoFailure, UnknownQuery, UnknownRole

DEFAULT_ITERATIONS = 100_000

# Shipped fixture: the administrator sees the whole catalog, organization A
# sees the two population queries it is entitled to, researchers see the four
# health-record queries.
DEFAULT_GRANTS = {
    "administrator": (
        "q1_exam_by_country", "q2_top5_diagnoses", "q3_age_profile",
        "q4_hepb_susceptible_by_gender", "q5_total_prescriptions",
        "q6_patients_by_doctor", "q7_age_profile_medication",
        "q8_top5_medications",
    ),
    "organization_a": ("q2_top5_diagnoses", "q3_age_profile"),
    "researcher": (
        "q1_exam_by_country", "q2_top5_diagnoses", "q3_age_profile",
        "q4_hepb_susceptible_by_gender",
    ),
}


@dataclass(frozen=True)
class UserAccount:
    username: str
    password_digest: str
    role_names: frozenset[str]


@dataclass(frozen=True)
class RbacState:
    roles: frozenset[str]
    users: Mapping[str, UserAccount]
    grants: frozenset[tuple[str, str]]


def default_state() -> RbacState:
    grants = frozenset(
        (role, qid) for role, qids in DEFAULT_GRANTS.items() for qid in qids
    )
    return RbacState(
        roles=frozenset(DEFAULT_GRANTS),
        users={},
        grants=grants,
    )


def digest_password(password: str, *, iterations: int = DEFAULT_ITERATIONS,
                    salt: bytes | None = None) -> str:
    if salt is None:
        salt = secrets.token_bytes(16)
    dk = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)
    return f"pbkdf2_sha256${iterations}${salt.hex()}${dk.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        scheme, iterations, salt_hex, digest_hex = stored.split("$")
        if scheme != "pbkdf2_sha256":
            return False
        dk = hashlib.pbkdf2_hmac(
            "sha256", password.encode("utf-8"), bytes.fromhex(salt_hex), int(iterations)
        )
        return hmac.compare_digest(dk.hex(), digest_hex)
    except (ValueError, TypeError):
        return False


# a real digest so unknown-user lookups spend the same time as wrong-password
_DUMMY_DIGEST = digest_password("unreachable", salt=b"\x00" * 16)


def verify_credentials(state: RbacState, username: str, password: str) -> UserAccount:
    """Return the account on match; BadCredentials otherwise (uniform error)."""
    account = state.users.get(username)
    if account is None:
        verify_password(password, _DUMMY_DIGEST)
        raise BadCredentials("bad credentials")
    if not verify_password(password, account.password_digest):
        raise BadCredentials("bad credentials")
    return account


def create_user(state: RbacState, username: str, password: str,
                roles: Iterable[str], *, iterations: int = DEFAULT_ITERATIONS) -> RbacState:
    if username in state.users:
        raise DuplicateUser(f"user {username!r} already exists")
    if not password:
        raise EmptyPassword("password must be non-empty")
    role_set = frozenset(roles)
    unknown = role_set - state.roles
    if unknown:
        raise UnknownRole(f"unknown roles: {sorted(unknown)}")
    if not role_set:
        raise UnknownRole("at least one role is required")
    account = UserAccount(
        username=username,
        password_digest=digest_password(password, iterations=iterations),
        role_names=role_set,
    )
    users = dict(state.users)
    users[username] = account
    return RbacState(roles=state.roles, users=users, grants=state.grants)


def add_role(state: RbacState, role_name: str) -> RbacState:
    return RbacState(roles=state.roles | {role_name}, users=state.users, grants=state.grants)


def grant(state: RbacState, role_name: str, query_id: str,
          known_queries: Iterable[str]) -> RbacState:
    if role_name not in state.roles:
        raise UnknownRole(f"unknown role {role_name!r}")
    if query_id not in set(known_queries):
        raise UnknownQuery(f"unknown query {query_id!r}")
    return RbacState(
        roles=state.roles,
        users=state.users,
        grants=state.grants | {(role_name, query_id)},
    )


def revoke(state: RbacState, role_name: str, query_id: str) -> RbacState:
    if role_name not in state.roles:
        raise UnknownRole(f"unknown role {role_name!r}")
    return RbacState(
        roles=state.roles,
        users=state.users,
        grants=state.grants - {(role_name, query_id)},
    )


def permitted_queries(state: RbacState, principal_roles: Iterable[str]) -> frozenset[str]:
    """Union of grants across the principal's roles."""
    roles = set(principal_roles)
    return frozenset(qid for role, qid in state.grants if role in roles)


def check_permission(state: RbacState, principal_roles: Iterable[str], query_id: str) -> bool:
    return query_id in permitted_queries(state, principal_roles)


def save_state(state: RbacState, path: str | os.PathLike) -> None:
    """Atomic rewrite of the RBAC file."""
    doc = {
        "version": 1,
        "roles": sorted(state.roles),
        "users": [
            {
                "username": u.username,
                "password_digest": u.password_digest,
                "roles": sorted(u.role_names),
            }
            for u in sorted(state.users.values(), key=lambda u: u.username)
        ],
        "grants": [
            {"role": role, "query_id": qid} for role, qid in sorted(state.grants)
        ],
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_state(path: str | os.PathLike) -> RbacState:
    """Load the RBAC file; a missing file yields the default fixture."""
    path = Path(path)
    if not path.exists():
        return default_state()
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    users = {
        u["username"]: UserAccount(
            username=u["username"],
            password_digest=u["password_digest"],
            role_names=frozenset(u["roles"]),
        )
        for u in doc.get("users", [])
    }
    return RbacState(
        roles=frozenset(doc.get("roles", [])),
        users=users,
        grants=frozenset((g["role"], g["query_id"]) for g in doc.get("grants", [])),
    )
