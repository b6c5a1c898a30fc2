"""IEC 61131-3 identifier rules and name sanitization."""

from __future__ import annotations

import re

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

# Keywords of the ST subset plus declaration keywords; none of these may be
# used as a member, port or block name because they would appear verbatim in
# generated code.
ST_KEYWORDS = frozenset(
    {
        "TRUE", "FALSE", "AND", "OR", "XOR", "NOT", "MOD",
        "IF", "THEN", "ELSIF", "ELSE", "END_IF",
        "FOR", "TO", "BY", "DO", "END_FOR",
        "WHILE", "END_WHILE", "REPEAT", "UNTIL", "END_REPEAT",
        "GOTO", "EXIT", "RETURN", "CASE", "OF", "END_CASE",
        "FUNCTION", "END_FUNCTION", "FUNCTION_BLOCK", "END_FUNCTION_BLOCK",
        "PROGRAM", "END_PROGRAM", "VAR", "VAR_INPUT", "VAR_OUTPUT", "END_VAR",
        "BOOL", "INT", "DINT", "REAL", "LREAL",
    }
)

# Reserved marker for a flow endpoint on the owning block itself.
SELF_MARKER = "self"


def identifier_error(name: str) -> str | None:
    """Return a reason string if `name` is not a valid IEC identifier."""
    if not name:
        return "empty identifier"
    if not _IDENT_RE.match(name):
        if name[0].isdigit():
            return "identifier must not start with a digit"
        return "identifier may contain only letters, digits and underscores"
    if "__" in name:
        return "identifier must not contain consecutive underscores"
    if name.endswith("_"):
        return "identifier must not end with an underscore"
    if name.upper() in ST_KEYWORDS:
        return "identifier collides with a reserved keyword"
    if name.lower() == SELF_MARKER:
        return "'self' is reserved for flow endpoints"
    return None


def is_identifier(name: str) -> bool:
    return identifier_error(name) is None


def sanitize(name: str) -> str:
    """Map a free-form model name onto a valid IEC identifier.

    Non-identifier characters become underscores; runs collapse; a leading
    digit gets an underscore prefix; trailing underscores are stripped.
    """
    out = re.sub(r"[^A-Za-z0-9_]+", "_", name)
    out = re.sub(r"_+", "_", out).strip("_")
    if not out:
        out = "x"
    if out[0].isdigit():
        out = "v" + out
    if out.upper() in ST_KEYWORDS or out.lower() == SELF_MARKER:
        out += "1"
    return out


def unique_name(base: str, taken: set[str]) -> str:
    """Disambiguate `base` against `taken` (case-insensitive) with _2, _3..."""
    candidate = base
    n = 1
    while candidate.lower() in taken:
        n += 1
        candidate = f"{base}_{n}"
    taken.add(candidate.lower())
    return candidate
