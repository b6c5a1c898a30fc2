"""Diagnostics shared by the parser, resolver and validator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


# Parse / format
E_SYNTAX = "E_SYNTAX"
E_IDENT = "E_IDENT"
E_VERSION = "E_VERSION"
E_UNKNOWN_KEY = "E_UNKNOWN_KEY"
W_UNKNOWN_KEY = "W_UNKNOWN_KEY"
E_VALUE = "E_VALUE"

# Reference resolution
E_UNRESOLVED_REF = "E_UNRESOLVED_REF"
E_DUP_ID = "E_DUP_ID"
E_DUP_NAME = "E_DUP_NAME"
E_RELATION_KIND = "E_RELATION_KIND"

# Block restrictions
E_DUP_ORDER = "E_DUP_ORDER"
E_ORDER_NONPOSITIVE = "E_ORDER_NONPOSITIVE"
E_FC_FLOW_NONZERO = "E_FC_FLOW_NONZERO"
E_FLOW_ORDER_NONPOSITIVE = "E_FLOW_ORDER_NONPOSITIVE"
E_FC_OUT_COUNT = "E_FC_OUT_COUNT"
E_BODY_PARSE = "E_BODY_PARSE"

# Connections and flows
E_TYPE_INCOMPAT = "E_TYPE_INCOMPAT"
W_WIDEN = "W_WIDEN"
E_DIRECTION = "E_DIRECTION"

# System-level completeness
E_SA_UNALLOCATED = "E_SA_UNALLOCATED"
E_SA_MULTI_ALLOC = "E_SA_MULTI_ALLOC"
E_AF_NO_SA = "E_AF_NO_SA"
W_REQ_UNTRACED = "W_REQ_UNTRACED"
E_MISSING_ADDRESS = "E_MISSING_ADDRESS"
W_CTRL_CROSS_NODE = "W_CTRL_CROSS_NODE"
E_REFINE_CYCLE = "E_REFINE_CYCLE"
E_PORT_DIRECTION = "E_PORT_DIRECTION"
E_PORT_MISMATCH = "E_PORT_MISMATCH"

# Timing lint
W_BUDGET = "W_BUDGET"
W_NFR_TIME = "W_NFR_TIME"

E_PART_CYCLE = "E_PART_CYCLE"

# Code generation
E_UNBOUND_FC_PARAM = "E_UNBOUND_FC_PARAM"
E_AMBIGUOUS_FC_BINDING = "E_AMBIGUOUS_FC_BINDING"
E_VALIDATION_FAILED = "E_VALIDATION_FAILED"

# ST parsing and runtime
E_ST_SYNTAX = "E_ST_SYNTAX"
E_LOOP_FORBIDDEN = "E_LOOP_FORBIDDEN"
E_RUNTIME = "E_RUNTIME"

# Debug protocol
E_UNKNOWN_NAME = "E_UNKNOWN_NAME"
E_BAD_STATE = "E_BAD_STATE"
E_PROTOCOL = "E_PROTOCOL"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    path: str
    message: str

    @classmethod
    def error(cls, code: str, path: str, message: str) -> "Diagnostic":
        return cls(Severity.ERROR, code, path, message)

    @classmethod
    def warning(cls, code: str, path: str, message: str) -> "Diagnostic":
        return cls(Severity.WARNING, code, path, message)

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "code": self.code,
            "path": self.path,
            "message": self.message,
        }

    def __str__(self) -> str:
        return f"{self.severity.value} {self.code} {self.path}: {self.message}"


@dataclass
class ValidationReport:
    """Result of running the validator; passed iff no error-severity entries."""

    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(d.severity is Severity.ERROR for d in self.diagnostics)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.WARNING]

    def codes(self) -> set[str]:
        return {d.code for d in self.diagnostics}

    def to_json(self) -> str:
        payload = {
            "passed": self.passed,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }
        return json.dumps(payload, indent=2) + "\n"

    def to_text(self) -> str:
        lines = [str(d) for d in self.diagnostics]
        lines.append(
            f"{len(self.errors)} errors, {len(self.warnings)} warnings"
        )
        return "\n".join(lines) + "\n"
