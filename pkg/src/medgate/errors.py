"""Domain errors shared across the gateway.

Every error carries a stable machine-readable ``code`` so the HTTP layer and
the CLI can map failures to responses / exit output without string matching.
The full set of codes is documented in the README.
"""

from __future__ import annotations


class GatewayError(Exception):
    """Base class for all domain errors."""

    code = "internal_error"


# --- records store -----------------------------------------------------------

class MissingTableFile(GatewayError):
    code = "missing_table_file"


class MalformedRow(GatewayError):
    code = "malformed_row"

    def __init__(self, file: str, line: int, message: str):
        super().__init__(f"{file}:{line}: {message}")
        self.file = file
        self.line = line


class DuplicateKey(GatewayError):
    code = "duplicate_key"


class ReferentialIntegrityViolation(GatewayError):
    code = "referential_integrity"

    def __init__(self, table: str, row: int, reference: str):
        super().__init__(f"{table} row {row}: dangling reference {reference}")
        self.table = table
        self.row = row
        self.reference = reference


class IoFailure(GatewayError):
    code = "io_failure"


# --- synthetic generator ------------------------------------------------------

class InconsistentSpec(GatewayError):
    code = "inconsistent_spec"


# --- query engine -------------------------------------------------------------

class DuplicateQueryId(GatewayError):
    code = "duplicate_query_id"


class BlockedOutputColumn(GatewayError):
    code = "blocked_output_column"

    def __init__(self, label: str):
        super().__init__(f"output column {label!r} hits the identifier blocklist")
        self.label = label


class UnknownQuery(GatewayError):
    code = "unknown_query"


class MissingParam(GatewayError):
    code = "missing_param"

    def __init__(self, param: str):
        super().__init__(f"missing parameter {param!r}")
        self.param = param


class BadParamFormat(GatewayError):
    code = "bad_param_format"

    def __init__(self, param: str, message: str):
        super().__init__(f"parameter {param!r}: {message}")
        self.param = param


class BlockedInput(GatewayError):
    """Raised when a raw parameter fails one of the two input guards.

    ``reason`` is either ``"deidentification"`` or ``"injection"``.
    """

    code = "input_blocked"

    def __init__(self, param: str, reason: str):
        super().__init__(f"parameter {param!r} blocked ({reason})")
        self.param = param
        self.reason = reason


# --- access control -----------------------------------------------------------

class DuplicateUser(GatewayError):
    code = "duplicate_user"


class UnknownRole(GatewayError):
    code = "unknown_role"


class EmptyPassword(GatewayError):
    code = "empty_password"


class BadCredentials(GatewayError):
    code = "bad_credentials"


# --- tokens --------------------------------------------------------------------

class MalformedToken(GatewayError):
    code = "malformed_token"


class BadSignature(GatewayError):
    code = "bad_signature"


class ExpiredToken(GatewayError):
    code = "expired_token"


# --- serialization -------------------------------------------------------------

class DuplicateColumnLabel(GatewayError):
    code = "duplicate_column_label"


# --- services ------------------------------------------------------------------

class AuditFailure(GatewayError):
    """The mandatory audit write failed; the triggering request must fail."""

    code = "audit_failure"
