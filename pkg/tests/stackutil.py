"""In-process five-service stack for tests: apps wired through TestClient."""

from fastapi.testclient import TestClient

from medgate import rbac
from medgate.audit import AuditLog
from medgate.queries import (
    HEALTH_RECORD_QUERIES,
    MEDICAL_RECORD_QUERIES,
    build_registry,
    canonical_catalog,
)
from medgate.services import LocalAuditSink, RemoteAuditSink, Runtime, build_app
from medgate.tokens import SigningKey

KEY = SigningKey(secret=b"s" * 32)
PEER_SECRET = "peer-secret-123"
NOW = 1_700_000_000


class Clock:
    def __init__(self, value=NOW):
        self.value = value

    def __call__(self):
        return self.value


def make_rbac_state():
    state = rbac.default_state()
    state = rbac.create_user(state, "alice", "s3cret", {"administrator"}, iterations=1000)
    state = rbac.create_user(state, "orga", "pw", {"organization_a"}, iterations=1000)
    return state


class Stack:
    """All five services wired together in-process."""

    def __init__(self, tmp_path, tables, log_path=None):
        self.clock = Clock()
        self.log = AuditLog(log_path or tmp_path / "audit.jsonl")
        log_rt = Runtime(kind="log", audit_sink=LocalAuditSink(self.log),
                         audit_log=self.log, peer_secret=PEER_SECRET, clock=self.clock)
        self.log_client = TestClient(build_app(log_rt))

        state = make_rbac_state()
        peers = {
            "log": "http://testserver",
            "auth": "http://auth.local",
            "health_record": "http://health.local",
            "medical_record": "http://medical.local",
        }

        def sink():
            return RemoteAuditSink("http://testserver", PEER_SECRET, client=self.log_client)

        self.auth = TestClient(build_app(Runtime(
            kind="auth", audit_sink=sink(), signing_key=KEY, rbac_state=state,
            peer_addresses=peers, token_ttl_seconds=900, clock=self.clock)))
        self.catalog = TestClient(build_app(Runtime(
            kind="catalog", audit_sink=sink(), signing_key=KEY, rbac_state=state,
            registry=build_registry(), peer_addresses=peers, clock=self.clock)))
        health_defs = [d for d in canonical_catalog() if d.query_id in HEALTH_RECORD_QUERIES]
        medical_defs = [d for d in canonical_catalog() if d.query_id in MEDICAL_RECORD_QUERIES]
        self.health = TestClient(build_app(Runtime(
            kind="health_record", audit_sink=sink(), signing_key=KEY, rbac_state=state,
            registry=build_registry(health_defs), tables=tables,
            peer_addresses=peers, clock=self.clock)))
        self.medical = TestClient(build_app(Runtime(
            kind="medical_record", audit_sink=sink(), signing_key=KEY, rbac_state=state,
            registry=build_registry(medical_defs), tables=tables,
            peer_addresses=peers, clock=self.clock)))

    def token(self, username="alice", password="s3cret"):
        resp = self.auth.post("/auth/token", json={"username": username, "password": password})
        assert resp.status_code == 200, resp.text
        return resp.json()["token"]

    def bearer(self, token):
        return {"Authorization": f"Bearer {token}"}

    def entries(self):
        return self.log.read_entries()

    def resource_for(self, query_id):
        return self.health if query_id in HEALTH_RECORD_QUERIES else self.medical
