"""The bind-execute-serialize core shared by the HTTP services and the CLI.

Both surfaces call this single path so identical inputs yield byte-identical
payloads regardless of transport.
"""

from __future__ import annotations

from typing import Mapping

from .guard import GuardConfig
from .queries import QueryContext, QueryRegistry, bind, execute
from .records import ClinicalTables
from .wire import serialize


def execute_serialized(registry: QueryRegistry, tables: ClinicalTables, query_id: str,
                       raw_params: Mapping[str, str], fmt: str, ctx: QueryContext,
                       guard_cfg: GuardConfig = GuardConfig()) -> bytes:
    bound = bind(registry, query_id, raw_params, guard_cfg)
    return serialize(execute(bound, tables, ctx), fmt)


def audit_param_detail(definition, bindings: Mapping) -> str:
    """Audit-safe parameter summary: names always, values only for dates.

    Text parameter values never reach the log, so the log itself cannot leak
    probe strings or identifier-shaped input.
    """
    parts = []
    for name, kind in definition.params:
        if kind == "date":
            parts.append(f"{name}={bindings[name].isoformat()}")
        else:
            parts.append(name)
    return ",".join(parts)
