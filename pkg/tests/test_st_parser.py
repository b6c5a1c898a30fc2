"""The loop-free ST subset: lexing, precedence, statement numbering."""

import pytest

from maspc.st.parser import (
    Assign,
    Binary,
    Call,
    CallStmt,
    If,
    Lit,
    LOOP_KEYWORDS,
    Name,
    StSyntaxError,
    TokKind,
    Unary,
    UnitKind,
    iter_statements,
    parse_artifact,
    parse_statements,
    statement_names,
    tokenize,
)


# -- lexing ---------------------------------------------------------------------


@pytest.mark.parametrize("word", sorted(LOOP_KEYWORDS))
def test_every_loop_keyword_rejected(word):
    with pytest.raises(StSyntaxError) as err:
        tokenize(f"x := {word};")
    assert err.value.code == "E_LOOP_FORBIDDEN"
    assert word in str(err.value)


def test_loop_keyword_case_insensitive():
    with pytest.raises(StSyntaxError) as err:
        tokenize("While")
    assert err.value.code == "E_LOOP_FORBIDDEN"


def test_loop_word_inside_comment_is_fine():
    tokens = tokenize("(* FOR WHILE *) x := 1; // REPEAT\n")
    assert [t.text for t in tokens if t.kind is TokKind.IDENT] == ["x"]


def test_loop_word_as_prefix_is_an_identifier():
    # FORwards is a plain identifier, not the FOR keyword
    tokens = tokenize("FORward := 1;")
    assert tokens[0].kind is TokKind.IDENT


def test_unexpected_character_position():
    with pytest.raises(StSyntaxError) as err:
        tokenize("x := 1;\ny ?= 2;")
    assert err.value.line == 2
    assert err.value.col == 3


def test_block_comment_tracks_lines():
    tokens = tokenize("(* one\ntwo *) x := 1;")
    ident = next(t for t in tokens if t.kind is TokKind.IDENT)
    assert ident.line == 2


def test_numeric_literals_with_underscores():
    tokens = tokenize("1_000 2_5.5_0")
    assert tokens[0].text == "1000"
    assert tokens[1].text == "25.50"


# -- expressions ------------------------------------------------------------------


def expr_of(text: str):
    (stmt,) = parse_statements(f"x := {text};")
    return stmt.expr


def test_mul_binds_tighter_than_add():
    expr = expr_of("1 + 2 * 3")
    assert expr == Binary("+", Lit(1, None), Binary("*", Lit(2, None), Lit(3, None)))


def test_left_associativity():
    expr = expr_of("8 - 4 - 2")
    assert expr == Binary("-", Binary("-", Lit(8, None), Lit(4, None)), Lit(2, None))


def test_parentheses_override():
    expr = expr_of("(1 + 2) * 3")
    assert expr == Binary("*", Binary("+", Lit(1, None), Lit(2, None)), Lit(3, None))


def test_comparison_below_arithmetic():
    expr = expr_of("a + 1 > b * 2")
    assert expr.op == ">"
    assert expr.left.op == "+"
    assert expr.right.op == "*"


def test_boolean_precedence():
    # NOT > AND > XOR > OR
    expr = expr_of("a OR NOT b AND c")
    assert expr.op == "OR"
    assert expr.right == Binary("AND", Unary("NOT", Name(("b",))), Name(("c",)))


def test_mod_at_mul_level():
    expr = expr_of("a MOD 3 + 1")
    assert expr.op == "+"
    assert expr.left.op == "MOD"


def test_unary_minus_nests():
    expr = expr_of("--2")
    assert expr == Unary("-", Unary("-", Lit(2, None)))


def test_dotted_names():
    expr = expr_of("inst.port")
    assert expr == Name(("inst", "port"))


def test_call_with_named_args():
    expr = expr_of("Conv(raw := r)")
    assert isinstance(expr, Call)
    assert expr.args == [("raw", Name(("r",)))]


def test_bool_literals_typed():
    from maspc.model import DataType
    assert expr_of("TRUE") == Lit(True, DataType.BOOL)
    assert expr_of("1.5").data_type is None


# -- statements -------------------------------------------------------------------


def test_call_statement_requires_named_args():
    with pytest.raises(StSyntaxError):
        parse_statements("F(1);")


def test_missing_semicolon_reported():
    with pytest.raises(StSyntaxError) as err:
        parse_statements("x := 1")
    assert "';'" in str(err.value)


def test_if_elsif_else():
    (stmt,) = parse_statements(
        "IF a THEN x := 1; ELSIF b THEN x := 2; ELSE x := 3; END_IF;")
    assert isinstance(stmt, If)
    conds = [c for c, _ in stmt.branches]
    assert conds[0] == Name(("a",))
    assert conds[1] == Name(("b",))
    assert conds[2] is None


def test_statement_indices_preorder():
    stmts = parse_statements(
        "a := 1;"
        "IF a > 0 THEN b := 2; c := 3; ELSE d := 4; END_IF;"
        "e := 5;")
    walked = list(iter_statements(stmts))
    assert [s.index for s in walked] == list(range(len(walked)))
    # the IF itself takes index 1; its branches continue the numbering
    assert isinstance(walked[1], If)
    assert isinstance(walked[2], Assign) and walked[2].target == Name(("b",))


def test_statement_lines():
    stmts = parse_statements("a := 1;\n\nb := 2;")
    assert [s.line for s in stmts] == [1, 3]


def test_fb_invocation_statement():
    (stmt,) = parse_statements("inst();")
    assert isinstance(stmt, CallStmt)
    assert stmt.name == "inst" and stmt.args == []


def test_statement_names_collects_references_and_calls():
    stmts = parse_statements("y := Conv(raw := x) + z;")
    names, calls = statement_names(stmts)
    assert {str(n) for n in names} == {"x", "y", "z"}
    assert [c.name for c in calls] == ["Conv"]


# -- artifacts --------------------------------------------------------------------


FB_TEXT = """(* GENERATED - DO NOT EDIT *)
FUNCTION_BLOCK Mix
VAR_INPUT
    a : INT;
    b : REAL := 1.5;
END_VAR
VAR_OUTPUT
    y : REAL;
END_VAR
VAR
    t : INT := -3;
END_VAR
    y := b;
    IF a > t THEN
        y := b * 2.0;
    END_IF;
END_FUNCTION_BLOCK
"""


def test_parse_function_block():
    unit = parse_artifact(FB_TEXT)
    assert unit.kind is UnitKind.FUNCTION_BLOCK
    assert unit.name == "Mix"
    assert [d.name for d in unit.inputs] == ["a", "b"]
    assert unit.inputs[1].init == Lit(1.5, None)
    assert unit.locals[0].init == Lit(-3, None)
    assert unit.statement_count == 3  # assign, IF, nested assign


def test_parse_function_with_return_type():
    unit = parse_artifact(
        "FUNCTION Half : REAL\nVAR_INPUT\n    x : REAL;\nEND_VAR\n"
        "    Half := x / 2.0;\nEND_FUNCTION\n")
    assert unit.kind is UnitKind.FUNCTION
    assert unit.return_type is not None
    assert unit.return_type.value == "REAL"


def test_parse_program_with_fb_instance():
    unit = parse_artifact(
        "PROGRAM Main\nVAR\n    inst : Mix;\nEND_VAR\n    inst();\nEND_PROGRAM\n")
    assert unit.kind is UnitKind.PROGRAM
    decl = unit.locals[0]
    assert decl.data_type is None  # FB type, not a scalar
    assert decl.type_name == "Mix"


def test_artifact_trailing_garbage_rejected():
    with pytest.raises(StSyntaxError):
        parse_artifact("PROGRAM Main\nEND_PROGRAM\nx := 1;")


def test_artifact_missing_end_rejected():
    with pytest.raises(StSyntaxError):
        parse_artifact("PROGRAM Main\n    x := 1;\n")
