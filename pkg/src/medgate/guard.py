"""The two atomic input-validation services plus output-schema screening.

Every externally supplied string passes through here before any other
processing. Identifier screening is substring-based on lowercased text: that
over-blocks (for example "surname" hits the token "name") and is accepted as
fail-closed behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

DEFAULT_BLOCKLIST = frozenset({"name", "age", "address", "zipcode"})

# Classic injection vectors: quotes, statement separator, escape character,
# and SQL comment delimiters.
DEFAULT_ANTI_INJECTION = ("'", '"', ";", "\\", "--", "/*", "*/")


@dataclass(frozen=True)
class GuardConfig:
    blocklist: frozenset[str] = DEFAULT_BLOCKLIST
    anti_injection: tuple[str, ...] = DEFAULT_ANTI_INJECTION

    def __post_init__(self):
        if not self.blocklist or not self.anti_injection:
            raise ValueError("guard lists must be non-empty")
        if any(t != t.lower() for t in self.blocklist):
            raise ValueError("blocklist tokens must be lowercase")


def check_deidentification(s: str, cfg: GuardConfig = GuardConfig()) -> bool:
    """False iff the lowercased input contains any blocklist token."""
    lowered = s.lower()
    return not any(token in lowered for token in cfg.blocklist)


def check_injection(s: str, cfg: GuardConfig = GuardConfig()) -> bool:
    """False iff the input contains any configured character or sequence."""
    return not any(seq in s for seq in cfg.anti_injection)


def screen_output_schema(columns: Iterable[str], cfg: GuardConfig = GuardConfig()) -> bool:
    """False iff any column label fails the identifier check."""
    return all(check_deidentification(label, cfg) for label in columns)
