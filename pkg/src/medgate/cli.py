"""Operator command line: seed data, manage RBAC, run services, execute
queries locally, verify the audit chain.

Exit codes: 0 success, 1 domain error (machine code on stderr), 2 usage
error. Standard output is reserved for payloads; the local ``query`` path
produces byte-identical output to the HTTP endpoints for the same inputs.
"""

from __future__ import annotations

import json
import sys
from datetime import date

import click

from . import audit as audit_mod
from . import rbac
from .config import load_config, load_signing_key
from .errors import GatewayError, InconsistentSpec, UnknownQuery
from .guard import GuardConfig
from .pipeline import execute_serialized
from .queries import QueryContext, build_registry
from .records import load_tables, parse_iso_date, save_tables
from .synth import GenSpec, generate_dataset
from .tokens import issue_token, verify_token


def _fail(code: str, message: str):
    click.echo(f"{code}: {message}", err=True)
    sys.exit(1)


def _date_arg(value: str, name: str) -> date:
    try:
        return parse_iso_date(value)
    except ValueError:
        raise click.UsageError(f"{name} must be YYYY-MM-DD")


@click.group()
def main():
    """Aggregate-only clinical data sharing gateway."""


@main.command()
@click.option("--seed", type=int, required=True, help="Generator seed.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--rows-patient", type=int, default=None)
@click.option("--rows-examination", type=int, default=None)
@click.option("--rows-clinicaldetection", type=int, default=None)
@click.option("--rows-doctor", type=int, default=None)
@click.option("--rows-prescription", type=int, default=None)
@click.option("--rows-medication", type=int, default=None)
@click.option("--rows-prescriptmed", type=int, default=None)
@click.option("--reference-date", default=None)
@click.option("--window-start", default=None)
@click.option("--window-end", default=None)
def seed(seed, out_dir, reference_date, window_start, window_end, **rows):
    """Generate the synthetic dataset into --out."""
    overrides = {k: v for k, v in rows.items() if v is not None}
    if reference_date:
        overrides["reference_date"] = _date_arg(reference_date, "--reference-date")
    if window_start:
        overrides["date_window_start"] = _date_arg(window_start, "--window-start")
    if window_end:
        overrides["date_window_end"] = _date_arg(window_end, "--window-end")
    try:
        tables = generate_dataset(GenSpec(seed=seed, **overrides))
    except InconsistentSpec as exc:
        raise click.UsageError(f"inconsistent_spec: {exc}")
    try:
        save_tables(tables, out_dir)
    except GatewayError as exc:
        _fail(exc.code, str(exc))


@main.command()
@click.option("--kind", required=True,
              type=click.Choice(["auth", "catalog", "health_record", "medical_record", "log"]))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(kind, config_path):
    """Run one service until interrupted."""
    from .services import serve as serve_service

    try:
        cfg = load_config(config_path, kind_override=kind)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    serve_service(cfg)


@main.command()
@click.option("--id", "query_id", required=True)
@click.option("--param", "params", multiple=True, help="Repeatable key=value binding.")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--as", "as_role", required=True, help="Role to execute as (offline only).")
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "xml"]))
@click.option("--reference-date", default="2018-01-01")
@click.option("--rbac", "rbac_path", default=None, type=click.Path(),
              help="RBAC state file; built-in default grants when omitted.")
def query(query_id, params, data_dir, as_role, fmt, reference_date, rbac_path):
    """Execute a registered query locally and print the serialized result."""
    raw = {}
    for item in params:
        if "=" not in item:
            raise click.UsageError(f"--param expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        raw[key] = value
    registry = build_registry()
    state = rbac.load_state(rbac_path) if rbac_path else rbac.default_state()
    ctx = QueryContext(reference_date=_date_arg(reference_date, "--reference-date"))
    try:
        if query_id not in registry:
            raise UnknownQuery(f"unknown query {query_id!r}")
        if not rbac.check_permission(state, {as_role}, query_id):
            _fail("query_denied", f"role {as_role!r} may not run {query_id!r}")
        tables = load_tables(data_dir)
        body = execute_serialized(registry, tables, query_id, raw, fmt, ctx, GuardConfig())
    except GatewayError as exc:
        _fail(exc.code, str(exc))
    sys.stdout.buffer.write(body)


@main.group()
def user():
    """Manage user accounts."""


@user.command("add")
@click.argument("username")
@click.option("--password", required=True)
@click.option("--roles", required=True, help="Comma-separated role names.")
@click.option("--rbac", "rbac_path", required=True, type=click.Path())
def user_add(username, password, roles, rbac_path):
    state = rbac.load_state(rbac_path)
    role_set = {r.strip() for r in roles.split(",") if r.strip()}
    try:
        state = rbac.create_user(state, username, password, role_set)
        rbac.save_state(state, rbac_path)
    except GatewayError as exc:
        _fail(exc.code, str(exc))


@user.command("list")
@click.option("--rbac", "rbac_path", required=True, type=click.Path())
def user_list(rbac_path):
    state = rbac.load_state(rbac_path)
    for account in sorted(state.users.values(), key=lambda a: a.username):
        click.echo(f"{account.username} {','.join(sorted(account.role_names))}")


@main.command("grant")
@click.argument("role_name")
@click.argument("query_id")
@click.option("--rbac", "rbac_path", required=True, type=click.Path())
def grant_cmd(role_name, query_id, rbac_path):
    state = rbac.load_state(rbac_path)
    try:
        state = rbac.grant(state, role_name, query_id, build_registry().query_ids())
        rbac.save_state(state, rbac_path)
    except GatewayError as exc:
        _fail(exc.code, str(exc))


@main.command("revoke")
@click.argument("role_name")
@click.argument("query_id")
@click.option("--rbac", "rbac_path", required=True, type=click.Path())
def revoke_cmd(role_name, query_id, rbac_path):
    state = rbac.load_state(rbac_path)
    try:
        state = rbac.revoke(state, role_name, query_id)
        rbac.save_state(state, rbac_path)
    except GatewayError as exc:
        _fail(exc.code, str(exc))


@main.group()
def token():
    """Issue and inspect bearer tokens."""


@token.command("issue")
@click.option("--user", "username", required=True)
@click.option("--password", required=True)
@click.option("--rbac", "rbac_path", required=True, type=click.Path(exists=True))
@click.option("--secret", "secret_path", required=True, type=click.Path(exists=True))
@click.option("--ttl", type=int, default=900)
@click.option("--now", type=int, default=None, help="Epoch seconds; wall clock when omitted.")
def token_issue(username, password, rbac_path, secret_path, ttl, now):
    import time

    state = rbac.load_state(rbac_path)
    key = load_signing_key(secret_path)
    try:
        issued = issue_token(username, password, now if now is not None else int(time.time()),
                             ttl, key, state)
    except GatewayError as exc:
        _fail(exc.code, str(exc))
    click.echo(issued)


@main.command()
@click.option("--token", "token_text", default=None)
@click.option("--secret", "secret_path", default=None, type=click.Path(exists=True))
@click.option("--as", "as_role", default=None, help="Role name; offline alternative to --token.")
@click.option("--rbac", "rbac_path", default=None, type=click.Path())
def catalog(token_text, secret_path, as_role, rbac_path):
    """Print the query catalog visible to a token or role, as JSON."""
    import time

    if token_text:
        if not secret_path:
            raise click.UsageError("--token requires --secret")
        key = load_signing_key(secret_path)
        try:
            claims = verify_token(token_text, now=int(time.time()), key=key)
        except GatewayError as exc:
            _fail(exc.code, str(exc))
        roles = set(claims.roles)
    elif as_role:
        roles = {as_role}
    else:
        raise click.UsageError("provide --token or --as")
    state = rbac.load_state(rbac_path) if rbac_path else rbac.default_state()
    allowed = rbac.permitted_queries(state, roles)
    entries = [
        {
            "query_id": d.query_id,
            "description": d.description,
            "params": [{"name": n, "kind": k} for n, k in d.params],
            "url_path": f"/query/{d.query_id}",
        }
        for d in build_registry().definitions()
        if d.query_id in allowed
    ]
    click.echo(json.dumps(entries, indent=2))


@main.group(name="audit")
def audit_group():
    """Inspect and verify the audit log."""


@audit_group.command("verify")
@click.option("--log", "log_path", required=True, type=click.Path())
def audit_verify(log_path):
    try:
        broken = audit_mod.verify_file(log_path)
    except GatewayError as exc:
        _fail(exc.code, str(exc))
    if broken is None:
        click.echo("intact")
    else:
        click.echo(str(broken))
        sys.exit(1)


@audit_group.command("tail")
@click.option("-n", "count", type=int, default=10)
@click.option("--log", "log_path", required=True, type=click.Path())
def audit_tail(count, log_path):
    log = audit_mod.AuditLog(log_path)
    try:
        entries = log.tail(count)
    except GatewayError as exc:
        _fail(exc.code, str(exc))
    for e in entries:
        click.echo(json.dumps({
            "seq": e.seq, "timestamp": e.timestamp, "principal": e.principal,
            "jti": e.jti, "action": e.action, "detail": e.detail, "outcome": e.outcome,
        }))


if __name__ == "__main__":
    main()
