"""Recursive-descent parser for the loop-free IEC 61131-3 ST subset.

Covered: FUNCTION / FUNCTION_BLOCK / PROGRAM frames with VAR_INPUT,
VAR_OUTPUT and VAR sections; assignments, FB/FC calls and IF chains;
expressions over BOOL/INT/DINT/REAL/LREAL with the usual operator
precedence.  Iteration constructs are rejected outright: a scan must
execute a statically bounded number of statements.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from ..diagnostics import E_LOOP_FORBIDDEN, E_ST_SYNTAX
from ..model import DataType


class StSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int, code: str = E_ST_SYNTAX):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.code = code


LOOP_KEYWORDS = frozenset({
    "FOR", "END_FOR", "WHILE", "END_WHILE", "REPEAT", "END_REPEAT",
    "UNTIL", "DO", "TO", "BY", "GOTO", "EXIT", "CONTINUE",
})

_KEYWORDS = frozenset({
    "IF", "THEN", "ELSIF", "ELSE", "END_IF",
    "AND", "OR", "XOR", "NOT", "MOD", "TRUE", "FALSE",
    "FUNCTION", "END_FUNCTION", "FUNCTION_BLOCK", "END_FUNCTION_BLOCK",
    "PROGRAM", "END_PROGRAM", "VAR", "VAR_INPUT", "VAR_OUTPUT", "END_VAR",
}) | LOOP_KEYWORDS

_TYPE_NAMES = {t.value: t for t in DataType}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>\(\*.*?\*\))
  | (?P<real>\d[\d_]*\.\d[\d_]*([eE][+-]?\d+)?)
  | (?P<int>\d[\d_]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|<>|<=|>=|[=<>+\-*/();,.:])
    """,
    re.VERBOSE | re.DOTALL,
)


class TokKind(Enum):
    KEYWORD = "keyword"
    IDENT = "ident"
    INT = "int"
    REAL = "real"
    OP = "op"
    EOF = "eof"


@dataclass(frozen=True)
class Token:
    kind: TokKind
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise StSyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        col = match.start() - line_start + 1
        kind = match.lastgroup
        lexeme = match.group()
        if kind == "nl":
            line += 1
            line_start = match.end()
        elif kind in ("ws", "lcomment"):
            pass
        elif kind == "bcomment":
            newlines = lexeme.count("\n")
            if newlines:
                line += newlines
                line_start = match.start() + lexeme.rindex("\n") + 1
        elif kind == "ident":
            upper = lexeme.upper()
            if upper in LOOP_KEYWORDS:
                raise StSyntaxError(
                    f"iteration construct '{upper}' is not allowed",
                    line, col, code=E_LOOP_FORBIDDEN,
                )
            if upper in _KEYWORDS:
                tokens.append(Token(TokKind.KEYWORD, upper, line, col))
            else:
                tokens.append(Token(TokKind.IDENT, lexeme, line, col))
        elif kind == "int":
            tokens.append(Token(TokKind.INT, lexeme.replace("_", ""), line, col))
        elif kind == "real":
            tokens.append(Token(TokKind.REAL, lexeme.replace("_", ""), line, col))
        else:
            tokens.append(Token(TokKind.OP, lexeme, line, col))
        pos = match.end()
    tokens.append(Token(TokKind.EOF, "", line, len(text) - line_start + 1))
    return tokens


# Expressions

@dataclass(frozen=True)
class Lit:
    value: bool | int | float
    data_type: DataType | None  # None: untyped numeric literal, adapts to context


@dataclass(frozen=True)
class Name:
    parts: tuple[str, ...]

    def __str__(self) -> str:
        return ".".join(self.parts)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: list[tuple[str | None, "Expr"]]
    line: int = 0


Expr = Lit | Name | Unary | Binary | Call


# Statements

@dataclass
class Assign:
    target: Name
    expr: Expr
    index: int = -1
    line: int = 0


@dataclass
class CallStmt:
    name: str
    args: list[tuple[str, Expr]]
    index: int = -1
    line: int = 0


@dataclass
class If:
    branches: list[tuple[Expr | None, list["Stmt"]]]
    index: int = -1
    line: int = 0


Stmt = Assign | CallStmt | If


@dataclass
class VarDecl:
    name: str
    type_name: str  # a DataType value or an FB type name
    init: Lit | None = None

    @property
    def data_type(self) -> DataType | None:
        return _TYPE_NAMES.get(self.type_name.upper())


class UnitKind(Enum):
    FUNCTION = "FUNCTION"
    FUNCTION_BLOCK = "FUNCTION_BLOCK"
    PROGRAM = "PROGRAM"


@dataclass
class StUnit:
    kind: UnitKind
    name: str
    return_type: DataType | None
    inputs: list[VarDecl] = field(default_factory=list)
    outputs: list[VarDecl] = field(default_factory=list)
    locals: list[VarDecl] = field(default_factory=list)
    body: list[Stmt] = field(default_factory=list)
    statement_count: int = 0

    def declarations(self) -> list[VarDecl]:
        return [*self.inputs, *self.outputs, *self.locals]


def iter_statements(stmts: list[Stmt]):
    """Pre-order walk matching the index numbering."""
    for stmt in stmts:
        yield stmt
        if isinstance(stmt, If):
            for _, body in stmt.branches:
                yield from iter_statements(body)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.counter = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind is not TokKind.EOF:
            self.pos += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        where = f"'{tok.text}'" if tok.kind is not TokKind.EOF else "end of input"
        raise StSyntaxError(f"{message}, found {where}", tok.line, tok.col)

    def expect_op(self, op: str) -> Token:
        tok = self.peek()
        if tok.kind is not TokKind.OP or tok.text != op:
            self.fail(f"expected '{op}'")
        return self.advance()

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind is not TokKind.KEYWORD or tok.text != word:
            self.fail(f"expected '{word}'")
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind is not TokKind.IDENT:
            self.fail("expected an identifier")
        return self.advance()

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind is TokKind.KEYWORD and tok.text in words

    # -- expressions ------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_xor()
        while self.at_keyword("OR"):
            self.advance()
            left = Binary("OR", left, self.parse_xor())
        return left

    def parse_xor(self) -> Expr:
        left = self.parse_and()
        while self.at_keyword("XOR"):
            self.advance()
            left = Binary("XOR", left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_cmp()
        while self.at_keyword("AND"):
            self.advance()
            left = Binary("AND", left, self.parse_cmp())
        return left

    def parse_cmp(self) -> Expr:
        left = self.parse_add()
        tok = self.peek()
        if tok.kind is TokKind.OP and tok.text in ("=", "<>", "<", ">", "<=", ">="):
            self.advance()
            return Binary(tok.text, left, self.parse_add())
        return left

    def parse_add(self) -> Expr:
        left = self.parse_mul()
        while True:
            tok = self.peek()
            if tok.kind is TokKind.OP and tok.text in ("+", "-"):
                self.advance()
                left = Binary(tok.text, left, self.parse_mul())
            else:
                return left

    def parse_mul(self) -> Expr:
        left = self.parse_unary()
        while True:
            tok = self.peek()
            if tok.kind is TokKind.OP and tok.text in ("*", "/"):
                self.advance()
                left = Binary(tok.text, left, self.parse_unary())
            elif self.at_keyword("MOD"):
                self.advance()
                left = Binary("MOD", left, self.parse_unary())
            else:
                return left

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok.kind is TokKind.OP and tok.text in ("-", "+"):
            self.advance()
            return Unary(tok.text, self.parse_unary())
        if self.at_keyword("NOT"):
            self.advance()
            return Unary("NOT", self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind is TokKind.INT:
            self.advance()
            return Lit(int(tok.text), None)
        if tok.kind is TokKind.REAL:
            self.advance()
            return Lit(float(tok.text), None)
        if self.at_keyword("TRUE"):
            self.advance()
            return Lit(True, DataType.BOOL)
        if self.at_keyword("FALSE"):
            self.advance()
            return Lit(False, DataType.BOOL)
        if tok.kind is TokKind.OP and tok.text == "(":
            self.advance()
            expr = self.parse_expr()
            self.expect_op(")")
            return expr
        if tok.kind is TokKind.IDENT:
            if self.peek(1).kind is TokKind.OP and self.peek(1).text == "(":
                return self.parse_call_expr()
            return self.parse_name()
        self.fail("expected an expression")

    def parse_name(self) -> Name:
        parts = [self.expect_ident().text]
        while self.peek().kind is TokKind.OP and self.peek().text == ".":
            self.advance()
            parts.append(self.expect_ident().text)
        return Name(tuple(parts))

    def parse_call_args(self) -> list[tuple[str | None, Expr]]:
        args: list[tuple[str | None, Expr]] = []
        self.expect_op("(")
        if self.peek().kind is TokKind.OP and self.peek().text == ")":
            self.advance()
            return args
        while True:
            if (
                self.peek().kind is TokKind.IDENT
                and self.peek(1).kind is TokKind.OP
                and self.peek(1).text == ":="
            ):
                pname = self.advance().text
                self.advance()
                args.append((pname, self.parse_expr()))
            else:
                args.append((None, self.parse_expr()))
            tok = self.peek()
            if tok.kind is TokKind.OP and tok.text == ",":
                self.advance()
                continue
            self.expect_op(")")
            return args

    def parse_call_expr(self) -> Call:
        tok = self.expect_ident()
        return Call(tok.text, self.parse_call_args(), line=tok.line)

    # -- statements -------------------------------------------------------

    def next_index(self) -> int:
        index = self.counter
        self.counter += 1
        return index

    def parse_statements(self, *stop: str) -> list[Stmt]:
        stmts: list[Stmt] = []
        while True:
            tok = self.peek()
            if tok.kind is TokKind.EOF or (stop and self.at_keyword(*stop)):
                return stmts
            stmts.append(self.parse_statement())

    def parse_statement(self) -> Stmt:
        tok = self.peek()
        if self.at_keyword("IF"):
            return self.parse_if()
        if tok.kind is not TokKind.IDENT:
            self.fail("expected a statement")
        index = self.next_index()
        if self.peek(1).kind is TokKind.OP and self.peek(1).text == "(":
            name = self.advance().text
            args = self.parse_call_args()
            self.expect_op(";")
            named: list[tuple[str, Expr]] = []
            for pname, expr in args:
                if pname is None:
                    raise StSyntaxError(
                        "call statements require named arguments", tok.line, tok.col
                    )
                named.append((pname, expr))
            return CallStmt(name, named, index, tok.line)
        target = self.parse_name()
        self.expect_op(":=")
        expr = self.parse_expr()
        self.expect_op(";")
        return Assign(target, expr, index, tok.line)

    def parse_if(self) -> If:
        tok = self.expect_keyword("IF")
        index = self.next_index()
        branches: list[tuple[Expr | None, list[Stmt]]] = []
        cond = self.parse_expr()
        self.expect_keyword("THEN")
        branches.append((cond, self.parse_statements("ELSIF", "ELSE", "END_IF")))
        while self.at_keyword("ELSIF"):
            self.advance()
            cond = self.parse_expr()
            self.expect_keyword("THEN")
            branches.append((cond, self.parse_statements("ELSIF", "ELSE", "END_IF")))
        if self.at_keyword("ELSE"):
            self.advance()
            branches.append((None, self.parse_statements("END_IF")))
        self.expect_keyword("END_IF")
        if self.peek().kind is TokKind.OP and self.peek().text == ";":
            self.advance()
        return If(branches, index, tok.line)

    # -- declarations -----------------------------------------------------

    def parse_var_decl(self) -> VarDecl:
        name_tok = self.expect_ident()
        self.expect_op(":")
        tok = self.peek()
        if tok.kind is not TokKind.IDENT:
            self.fail("expected a type name")
        type_name = self.advance().text
        init: Lit | None = None
        if self.peek().kind is TokKind.OP and self.peek().text == ":=":
            self.advance()
            init = self.parse_init_literal()
        self.expect_op(";")
        return VarDecl(name_tok.text, type_name, init)

    def parse_init_literal(self) -> Lit:
        negative = False
        if self.peek().kind is TokKind.OP and self.peek().text == "-":
            self.advance()
            negative = True
        tok = self.peek()
        if tok.kind is TokKind.INT:
            self.advance()
            value = int(tok.text)
            return Lit(-value if negative else value, None)
        if tok.kind is TokKind.REAL:
            self.advance()
            rvalue = float(tok.text)
            return Lit(-rvalue if negative else rvalue, None)
        if not negative and self.at_keyword("TRUE"):
            self.advance()
            return Lit(True, DataType.BOOL)
        if not negative and self.at_keyword("FALSE"):
            self.advance()
            return Lit(False, DataType.BOOL)
        self.fail("expected a literal initializer")

    def parse_var_sections(self, unit: StUnit) -> None:
        sections = {"VAR_INPUT": unit.inputs, "VAR_OUTPUT": unit.outputs,
                    "VAR": unit.locals}
        while self.at_keyword(*sections):
            target = sections[self.advance().text]
            while not self.at_keyword("END_VAR"):
                if self.peek().kind is TokKind.EOF:
                    self.fail("expected 'END_VAR'")
                target.append(self.parse_var_decl())
            self.advance()


def parse_statements(text: str) -> list[Stmt]:
    """Parse a bare statement list (e.g. a TransientBlock body)."""
    parser = _Parser(tokenize(text))
    stmts = parser.parse_statements()
    if parser.peek().kind is not TokKind.EOF:
        parser.fail("expected a statement")
    return stmts


def parse_artifact(text: str) -> StUnit:
    """Parse one FUNCTION, FUNCTION_BLOCK or PROGRAM artifact."""
    parser = _Parser(tokenize(text))
    tok = parser.peek()
    openers = {
        "FUNCTION": (UnitKind.FUNCTION, "END_FUNCTION"),
        "FUNCTION_BLOCK": (UnitKind.FUNCTION_BLOCK, "END_FUNCTION_BLOCK"),
        "PROGRAM": (UnitKind.PROGRAM, "END_PROGRAM"),
    }
    if not parser.at_keyword(*openers):
        parser.fail("expected FUNCTION, FUNCTION_BLOCK or PROGRAM")
    kind, closer = openers[parser.advance().text]
    name = parser.expect_ident().text
    return_type: DataType | None = None
    if kind is UnitKind.FUNCTION:
        parser.expect_op(":")
        type_tok = parser.expect_ident()
        return_type = _TYPE_NAMES.get(type_tok.text.upper())
        if return_type is None:
            parser.fail("expected a primitive return type", type_tok)
    unit = StUnit(kind, name, return_type)
    parser.parse_var_sections(unit)
    unit.body = parser.parse_statements(closer)
    parser.expect_keyword(closer)
    if parser.peek().kind is not TokKind.EOF:
        parser.fail("expected end of artifact")
    unit.statement_count = parser.counter
    return unit


def expression_names(expr: Expr) -> tuple[list[Name], list[Call]]:
    """Collect variable references and calls in evaluation order."""
    names: list[Name] = []
    calls: list[Call] = []

    def walk(node: Expr) -> None:
        if isinstance(node, Name):
            names.append(node)
        elif isinstance(node, Unary):
            walk(node.operand)
        elif isinstance(node, Binary):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Call):
            calls.append(node)
            for _, arg in node.args:
                walk(arg)

    walk(expr)
    return names, calls


def statement_names(stmts: list[Stmt]) -> tuple[list[Name], list[Call]]:
    """Collect all references in a statement list, pre-order."""
    names: list[Name] = []
    calls: list[Call] = []
    for stmt in iter_statements(stmts):
        if isinstance(stmt, Assign):
            names.append(stmt.target)
            sub_names, sub_calls = expression_names(stmt.expr)
            names.extend(sub_names)
            calls.extend(sub_calls)
        elif isinstance(stmt, CallStmt):
            for _, expr in stmt.args:
                sub_names, sub_calls = expression_names(expr)
                names.extend(sub_names)
                calls.extend(sub_calls)
        elif isinstance(stmt, If):
            for cond, _ in stmt.branches:
                if cond is not None:
                    sub_names, sub_calls = expression_names(cond)
                    names.extend(sub_names)
                    calls.extend(sub_calls)
    return names, calls
