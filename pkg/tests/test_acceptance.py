"""Acceptance suite: one test per release criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; the conftest hook prints one
ACCEPTANCE PASS/FAIL line per criterion.
"""

import json
import random
import re
import signal
import socket
import subprocess
import sys
import time
from datetime import date, timedelta
from pathlib import Path

import httpx
import pytest
from click.testing import CliRunner

import oracle
from medgate.audit import AuditLog, verify_file
from medgate.cli import main as cli_main
from medgate.errors import (
    BadSignature,
    BlockedInput,
    BlockedOutputColumn,
    ExpiredToken,
)
from medgate.pipeline import execute_serialized
from medgate.queries import (
    HEALTH_RECORD_QUERIES,
    MEDICAL_RECORD_QUERIES,
    QueryContext,
    QueryDefinition,
    QueryRegistry,
    bind,
    build_registry,
    execute,
)
from medgate.records import TABLE_FILES, load_tables
from medgate.synth import CITIES, FIRST_NAMES, SURNAMES
from medgate.tokens import SigningKey, issue_token, verify_token
from medgate.wire import to_json, to_xml
from stackutil import KEY, NOW, Stack, make_rbac_state
from test_guard import INJECTION_CORPUS
from test_wire import DIAG_RS, EMPTY_RS, GENDER_RS

ALL_QUERIES = HEALTH_RECORD_QUERIES + MEDICAL_RECORD_QUERIES
GOLDEN = Path(__file__).parent / "golden"
WINDOW_LO = date(2008, 1, 1)
WINDOW_HI = date(2017, 12, 31)


def _random_raw_params(rng, query_id, tables):
    span = (WINDOW_HI - WINDOW_LO).days
    a = WINDOW_LO + timedelta(days=rng.randrange(span + 1))
    b = WINDOW_LO + timedelta(days=rng.randrange(span + 1))
    start, end = min(a, b), max(a, b)
    raw = {"start": start.isoformat(), "end": end.isoformat()}
    if query_id == "q4_hepb_susceptible_by_gender":
        return {}
    if query_id == "q6_patients_by_doctor":
        doc = rng.choice(tables.doctors)
        raw["doctor_name"] = (f"{doc.given_name} {doc.family_name}"
                              if rng.random() < 0.8 else "Nemo Nullus")
    if query_id == "q7_age_profile_medication":
        med = rng.choice(tables.medications)
        raw["medication"] = med.medication_name if rng.random() < 0.8 else "Nullamab"
    return raw


# --- criterion: generator fidelity ------------------------------------------------

def test_generator_fidelity(tmp_path):
    out = tmp_path / "data"
    started = time.monotonic()
    result = CliRunner().invoke(cli_main, ["seed", "--seed", "42", "--out", str(out)])
    elapsed = time.monotonic() - started
    assert result.exit_code == 0, result.output
    assert elapsed < 10.0, f"seed took {elapsed:.1f}s"

    def rows(name):
        return len((out / name).read_text(encoding="utf-8").splitlines()) - 1

    assert rows("patient.csv") == 1881
    assert rows("examination.csv") == 2020
    assert rows("clinicaldetection.csv") == 6393
    assert rows("patient.csv") + rows("examination.csv") + rows("clinicaldetection.csv") == 10_294
    assert rows("doctor.csv") == 912
    assert rows("prescription.csv") == 3856
    assert rows("medication.csv") == 100
    assert rows("prescriptmed.csv") == 8801


# --- criterion: oracle equivalence --------------------------------------------------

def test_oracle_equivalence(default_tables):
    registry = build_registry()
    ctx = QueryContext()
    for query_id in ALL_QUERIES:
        rng = random.Random(f"acceptance-{query_id}")
        for _ in range(20):
            raw = _random_raw_params(rng, query_id, default_tables)
            bound = bind(registry, query_id, raw)
            engine_rows = execute(bound, default_tables, ctx).rows
            oracle_rows = oracle.run(query_id, default_tables, bound.bindings,
                                     ctx.reference_date)
            assert engine_rows == tuple(tuple(r) for r in oracle_rows), (
                f"{query_id} diverged from oracle for {raw}")


# --- criterion: serialization golden files -------------------------------------------

def test_serialization_golden_files():
    for rs, name in ((GENDER_RS, "gender_counts"), (DIAG_RS, "diagnoses_counts"),
                     (EMPTY_RS, "empty")):
        assert to_xml(rs) == (GOLDEN / f"{name}.xml").read_bytes()
        assert to_json(rs) == (GOLDEN / f"{name}.json").read_bytes()


# --- criterion: privacy suite ---------------------------------------------------------

def test_privacy_injection_corpus_rejected(tmp_path, small_tables):
    assert len(INJECTION_CORPUS) >= 50
    stack = Stack(tmp_path, small_tables)
    token = stack.token()
    for payload in INJECTION_CORPUS:
        resp = stack.medical.get(
            "/query/q6_patients_by_doctor",
            params={"doctor_name": payload, "start": "2017-01-01", "end": "2017-12-31"},
            headers=stack.bearer(token))
        assert resp.status_code == 422, f"{payload!r} -> {resp.status_code}"
        assert resp.json()["code"] == "input_blocked"


def test_privacy_blocked_output_columns():
    for label in ("name", "surname", "age", "Address", "zipcode", "PatientName"):
        registry = QueryRegistry()
        defn = QueryDefinition(query_id="rogue", description="plain words",
                               params=(), output_columns=(label,), plan=lambda t, b, c: [])
        with pytest.raises(BlockedOutputColumn):
            registry.register(defn)


def test_privacy_no_identity_values_in_responses(tmp_path, small_tables):
    stack = Stack(tmp_path, small_tables)
    token = stack.token()
    doctor = small_tables.doctors[0]
    medication = small_tables.medications[0]
    bodies = [stack.catalog.get("/catalog/queries", headers=stack.bearer(token)).text]
    for fmt in ("json", "xml"):
        for qid in ALL_QUERIES:
            params = {"format": fmt}
            if qid != "q4_hepb_susceptible_by_gender":
                params.update(start="2008-01-01", end="2017-12-31")
            if qid == "q6_patients_by_doctor":
                params["doctor_name"] = f"{doctor.given_name} {doctor.family_name}"
            if qid == "q7_age_profile_medication":
                params["medication"] = medication.medication_name
            resp = stack.resource_for(qid).get(f"/query/{qid}", params=params,
                                               headers=stack.bearer(token))
            assert resp.status_code == 200
            bodies.append(resp.text)

    identity_texts = set()
    for p in small_tables.patients:
        identity_texts.update((p.street_address, p.postal))
    identity_texts.update(FIRST_NAMES + SURNAMES + CITIES)
    pids = [p.pid for p in small_tables.patients]
    for body in bodies:
        for value in identity_texts:
            assert value not in body
        for pid in pids:
            assert not re.search(rf"\b{pid}\b", body)


# --- criterion: token suite --------------------------------------------------------------

def test_token_suite():
    accounts = make_rbac_state()
    token = issue_token("alice", "s3cret", NOW, 900, KEY, accounts)

    # round trip strictly inside the ttl
    for offset in (0, 1, 899):
        assert verify_token(token, now=NOW + offset, key=KEY).sub == "alice"
    # expired at exactly exp
    with pytest.raises(ExpiredToken):
        verify_token(token, now=NOW + 900, key=KEY)

    # 1,000 random single-bit tampers of header/claims: all BadSignature
    payload_end = token.rindex(".")
    rng = random.Random(20180522)
    for _ in range(1000):
        pos = rng.randrange(payload_end)
        bit = 1 << rng.randrange(8)
        tampered = token[:pos] + chr(ord(token[pos]) ^ bit) + token[pos + 1:]
        with pytest.raises(BadSignature):
            verify_token(tampered, now=NOW, key=KEY)

    # alg:none rejected, with or without a correct MAC
    import base64
    import hashlib
    import hmac as hmac_mod
    header = base64.urlsafe_b64encode(b'{"alg":"none","typ":"JWT"}').rstrip(b"=").decode()
    claims_seg = token.split(".")[1]
    signing_input = f"{header}.{claims_seg}".encode()
    good_mac = base64.urlsafe_b64encode(
        hmac_mod.new(KEY.secret, signing_input, hashlib.sha256).digest()).rstrip(b"=").decode()
    for sig in ("", "AAAA", good_mac):
        with pytest.raises(Exception) as err:
            verify_token(f"{header}.{claims_seg}.{sig}", now=NOW, key=KEY)
        assert err.value.__class__.__name__ in ("BadSignature", "MalformedToken")


# --- criterion: RBAC suite ------------------------------------------------------------------

def test_rbac_suite(tmp_path, small_tables):
    stack = Stack(tmp_path, small_tables)
    admin_entries = stack.catalog.get(
        "/catalog/queries", headers=stack.bearer(stack.token())).json()
    assert len(admin_entries) == 8

    orga_token = stack.token("orga", "pw")
    orga_entries = stack.catalog.get(
        "/catalog/queries", headers=stack.bearer(orga_token)).json()
    assert [e["query_id"] for e in orga_entries] == ["q2_top5_diagnoses", "q3_age_profile"]

    # direct URL access to an ungranted query: 403 plus a query_denied entry
    before = len(stack.entries())
    resp = stack.health.get("/query/q4_hepb_susceptible_by_gender",
                            headers=stack.bearer(orga_token))
    assert resp.status_code == 403
    assert resp.json()["code"] == "query_denied"
    new = stack.entries()[before:]
    assert len(new) == 1
    assert new[0].action == "query_denied"
    assert new[0].principal == "orga"


# --- criterion: end-to-end workflow ----------------------------------------------------------

def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _write_config(path, lines):
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines))


@pytest.fixture
def deployment(tmp_path):
    """Seed data and spawn the five services as real processes."""
    data_dir = tmp_path / "data"
    rbac_path = tmp_path / "rbac.json"
    secret_path = tmp_path / "signing.secret"
    peer_path = tmp_path / "peer.secret"
    log_path = tmp_path / "audit.jsonl"

    runner = CliRunner()
    assert runner.invoke(cli_main, ["seed", "--seed", "42", "--out", str(data_dir)]).exit_code == 0
    assert runner.invoke(cli_main, ["user", "add", "alice", "--password", "s3cret",
                                    "--roles", "administrator", "--rbac", str(rbac_path)]).exit_code == 0
    assert runner.invoke(cli_main, ["user", "add", "orga", "--password", "pw",
                                    "--roles", "organization_a", "--rbac", str(rbac_path)]).exit_code == 0
    secret_path.write_bytes(b"e2e-signing-secret-of-32-bytes!!")
    peer_path.write_text("e2e-peer-secret\n")

    ports = {kind: _free_port()
             for kind in ("auth", "catalog", "health_record", "medical_record", "log")}
    urls = {kind: f"http://127.0.0.1:{port}" for kind, port in ports.items()}

    common = [
        ("rbac_path", rbac_path), ("signing_secret_path", secret_path),
        ("peer_secret_path", peer_path), ("log_url", urls["log"]),
        ("token_ttl_seconds", 900), ("reference_date", "2018-01-01"),
    ]
    configs = {
        "log": [("kind", "log"), ("listen_address", f"127.0.0.1:{ports['log']}"),
                ("audit_log_path", log_path), ("peer_secret_path", peer_path)],
        "auth": [("kind", "auth"), ("listen_address", f"127.0.0.1:{ports['auth']}"), *common],
        "catalog": [("kind", "catalog"), ("listen_address", f"127.0.0.1:{ports['catalog']}"),
                    ("auth_url", urls["auth"]), ("health_record_url", urls["health_record"]),
                    ("medical_record_url", urls["medical_record"]), *common],
        "health_record": [("kind", "health_record"),
                          ("listen_address", f"127.0.0.1:{ports['health_record']}"),
                          ("data_dir", data_dir), *common],
        "medical_record": [("kind", "medical_record"),
                           ("listen_address", f"127.0.0.1:{ports['medical_record']}"),
                           ("data_dir", data_dir), *common],
    }

    procs = []
    try:
        for kind, lines in configs.items():
            cfg_path = tmp_path / f"{kind}.conf"
            _write_config(cfg_path, lines)
            procs.append(subprocess.Popen(
                [sys.executable, "-m", "medgate", "serve", "--kind", kind,
                 "--config", str(cfg_path)],
                stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL))
        with httpx.Client(timeout=2.0) as client:
            deadline = time.monotonic() + 30
            pending = dict(urls)
            while pending and time.monotonic() < deadline:
                for kind, url in list(pending.items()):
                    try:
                        if client.get(url + "/healthz").status_code == 200:
                            del pending[kind]
                    except httpx.HTTPError:
                        pass
                if pending:
                    time.sleep(0.2)
            assert not pending, f"services never became healthy: {sorted(pending)}"
        yield {"urls": urls, "data_dir": data_dir, "log_path": log_path,
               "rbac_path": rbac_path, "secret_path": secret_path}
    finally:
        for proc in procs:
            proc.send_signal(signal.SIGTERM)
        for proc in procs:
            try:
                proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                proc.kill()


def test_end_to_end_workflow(deployment):
    started = time.monotonic()
    urls = deployment["urls"]
    tables = load_tables(deployment["data_dir"])
    doctor = tables.doctors[0]
    medication = tables.medications[0]
    bodies = []

    with httpx.Client(timeout=10.0) as client:
        # step 1: discover the auth endpoint from the web-facing service
        entry = client.get(urls["catalog"] + "/catalog/entrypoints")
        assert entry.status_code == 200
        auth_url = entry.json()["auth_token_url"]

        # step 2: obtain a token
        token_resp = client.post(auth_url, json={"username": "alice", "password": "s3cret"})
        assert token_resp.status_code == 200
        token = token_resp.json()["token"]
        headers = {"Authorization": f"Bearer {token}"}

        # step 3: fetch the catalog
        catalog_resp = client.get(urls["catalog"] + "/catalog/queries", headers=headers)
        assert catalog_resp.status_code == 200
        catalog = catalog_resp.json()
        assert [e["query_id"] for e in catalog] == list(ALL_QUERIES)
        bodies.append(catalog_resp.text)

        # step 4: execute all eight queries against their resource services
        statuses = []
        for entry in catalog:
            params = {}
            if any(p["name"] == "start" for p in entry["params"]):
                params.update(start="2010-01-01", end="2010-12-31")
            if entry["query_id"] == "q6_patients_by_doctor":
                params["doctor_name"] = f"{doctor.given_name} {doctor.family_name}"
            if entry["query_id"] == "q7_age_profile_medication":
                params["medication"] = medication.medication_name
            resp = client.get(entry["url_path"], params=params, headers=headers)
            statuses.append(resp.status_code)
            bodies.append(resp.text)
        assert statuses == [200] * 8

    # the audit chain covering the whole session verifies intact
    result = CliRunner().invoke(cli_main, ["audit", "verify", "--log",
                                           str(deployment["log_path"])])
    assert result.exit_code == 0
    assert result.output.strip() == "intact"
    entries = AuditLog(deployment["log_path"]).read_entries()
    assert [e.action for e in entries].count("query_execute") == 8

    # privacy scan of everything the deployment served in this session
    pids = [p.pid for p in tables.patients]
    for body in bodies:
        for p in tables.patients:
            assert p.street_address not in body
            assert p.postal not in body
        for value in FIRST_NAMES + SURNAMES + CITIES:
            assert value not in body
        for pid in pids:
            assert not re.search(rf"\b{pid}\b", body)

    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"workflow took {elapsed:.1f}s"


# --- criterion: audit tamper detection ----------------------------------------------------------

def test_audit_tamper_detection(tmp_path):
    rng = random.Random(424242)
    for trial in range(100):
        path = tmp_path / f"log{trial}.jsonl"
        log = AuditLog(path)
        n = rng.randint(1, 8)
        for i in range(1, n + 1):
            log.append(timestamp=i, principal="alice", jti=f"j{i}",
                       action="query_execute", detail=f"d{i}", outcome="ok")
        raw = bytearray(path.read_bytes())
        line_starts = [0]
        for idx, b in enumerate(raw):
            if b == 0x0A and idx + 1 < len(raw):
                line_starts.append(idx + 1)
        entry_idx = rng.randrange(len(line_starts))
        start = line_starts[entry_idx]
        end = raw.index(0x0A, start)
        pos = rng.randrange(start, end)
        raw[pos] ^= 1 << rng.randrange(8)
        path.write_bytes(bytes(raw))
        corrupted_seq = entry_idx + 1
        result = verify_file(path)
        assert result is not None, f"trial {trial}: flip in entry {corrupted_seq} undetected"
        assert result in (corrupted_seq, min(corrupted_seq + 1, n))

    # deletion of any middle entry is detected
    path = tmp_path / "deletion.jsonl"
    log = AuditLog(path)
    for i in range(1, 7):
        log.append(timestamp=i, principal="alice", jti="", action="query_execute",
                   detail="", outcome="ok")
    for victim in range(2, 6):
        lines = path.read_text().splitlines()
        del lines[victim - 1]
        mutated = tmp_path / f"deleted{victim}.jsonl"
        mutated.write_text("\n".join(lines) + "\n")
        assert verify_file(mutated) == victim


# --- criterion: CLI/HTTP equivalence ---------------------------------------------------------------

def test_cli_http_equivalence(tmp_path, default_tables):
    data_dir = tmp_path / "data"
    result = CliRunner().invoke(cli_main, ["seed", "--seed", "42", "--out", str(data_dir)])
    assert result.exit_code == 0
    tables = load_tables(data_dir)
    stack = Stack(tmp_path, tables)
    token = stack.token()

    rng = random.Random("equivalence")
    runner = CliRunner()
    for trial in range(20):
        query_id = rng.choice(ALL_QUERIES)
        fmt = rng.choice(("json", "xml"))
        raw = _random_raw_params(rng, query_id, tables)

        args = ["query", "--id", query_id, "--data", str(data_dir),
                "--as", "administrator", "--format", fmt]
        for k, v in raw.items():
            args += ["--param", f"{k}={v}"]
        cli_result = runner.invoke(cli_main, args)
        assert cli_result.exit_code == 0, cli_result.output

        params = dict(raw, format=fmt)
        resp = stack.resource_for(query_id).get(f"/query/{query_id}", params=params,
                                                headers=stack.bearer(token))
        assert resp.status_code == 200
        assert cli_result.stdout_bytes == resp.content, (
            f"trial {trial}: CLI and HTTP bytes diverged for {query_id} {raw} {fmt}")
