"""Cyclic-scan interpreter for the parsed ST subset.

One NodeRuntime hosts the instance tree of a node program and executes it a
statement at a time, so a scan can pause at a breakpoint and resume exactly
where it stopped.  Forced variables are enforced at every write, FC calls
evaluate atomically, and every runtime fault carries its artifact and
statement index.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from ..model import DataType
from . import parser as st
from .parser import (
    Assign,
    Call,
    CallStmt,
    If,
    Lit,
    Name,
    StSyntaxError,
    Stmt,
    StUnit,
    UnitKind,
)

INT_MIN, INT_MAX = -(2 ** 15), 2 ** 15 - 1
DINT_MIN, DINT_MAX = -(2 ** 31), 2 ** 31 - 1


class RuntimeFault(Exception):
    """E_RUNTIME: halts the scan; annotated as it unwinds."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message
        self.artifact: str | None = None
        self.index: int | None = None
        self.node: str | None = None
        self.cycle: int | None = None

    def __str__(self) -> str:
        where = []
        if self.node is not None:
            where.append(f"node {self.node}")
        if self.cycle is not None:
            where.append(f"cycle {self.cycle}")
        if self.artifact is not None:
            where.append(f"{self.artifact}#{self.index}")
        suffix = f" ({', '.join(where)})" if where else ""
        return self.message + suffix


@dataclass(frozen=True)
class Value:
    type: DataType
    py: bool | int | float

    def json(self) -> bool | int | float:
        return self.py


def quantize_real(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


def wrap_int(x: int, bits: int) -> int:
    span = 1 << bits
    x &= span - 1
    return x - span if x >= (span >> 1) else x


def default_value(dtype: DataType) -> Value:
    if dtype is DataType.BOOL:
        return Value(dtype, False)
    if dtype in (DataType.INT, DataType.DINT):
        return Value(dtype, 0)
    return Value(dtype, 0.0)


def coerce_scalar(dtype: DataType, raw: bool | int | float,
                  where: str) -> Value:
    """Turn an external scalar (scenario, force, initializer) into a Value."""
    if dtype is DataType.BOOL:
        if isinstance(raw, bool):
            return Value(dtype, raw)
        raise RuntimeFault(f"{where}: expected BOOL, got {raw!r}")
    if isinstance(raw, bool):
        raise RuntimeFault(f"{where}: expected {dtype.value}, got BOOL")
    if dtype in (DataType.INT, DataType.DINT):
        if not isinstance(raw, int):
            raise RuntimeFault(f"{where}: expected {dtype.value}, got {raw!r}")
        low, high = (INT_MIN, INT_MAX) if dtype is DataType.INT else (DINT_MIN, DINT_MAX)
        if not low <= raw <= high:
            raise RuntimeFault(f"{where}: {raw} out of {dtype.value} range")
        return Value(dtype, raw)
    if not isinstance(raw, (int, float)):
        raise RuntimeFault(f"{where}: expected {dtype.value}, got {raw!r}")
    x = float(raw)
    return Value(dtype, quantize_real(x) if dtype is DataType.REAL else x)


# Untyped literals use type None until context fixes them.
_UNTYPED = None


def _lit_value(lit: Lit) -> tuple[DataType | None, bool | int | float]:
    if lit.data_type is DataType.BOOL:
        return DataType.BOOL, lit.value
    return _UNTYPED, lit.value


def _fit_literal(dtype: DataType, py: bool | int | float) -> bool | int | float:
    """Adapt an untyped numeric literal to a concrete numeric type."""
    if dtype is DataType.INT:
        if isinstance(py, float) or not INT_MIN <= py <= INT_MAX:
            raise RuntimeFault(f"literal {py!r} does not fit INT")
        return py
    if dtype is DataType.DINT:
        if isinstance(py, float) or not DINT_MIN <= py <= DINT_MAX:
            raise RuntimeFault(f"literal {py!r} does not fit DINT")
        return py
    if dtype is DataType.REAL:
        return quantize_real(float(py))
    if dtype is DataType.LREAL:
        return float(py)
    raise RuntimeFault(f"literal {py!r} cannot be BOOL")


def convert_for_assign(dtype: DataType, vtype: DataType | None,
                       py: bool | int | float) -> Value:
    """Assignment conversion: exact types, INT->DINT and REAL->LREAL
    widening, and context-typed literals; everything else faults."""
    if vtype is _UNTYPED:
        return Value(dtype, _fit_literal(dtype, py))
    if vtype is dtype:
        return Value(dtype, py)
    if vtype is DataType.INT and dtype is DataType.DINT:
        return Value(dtype, py)
    if vtype is DataType.REAL and dtype is DataType.LREAL:
        return Value(dtype, py)
    raise RuntimeFault(
        f"cannot assign {vtype.value if vtype else '?'} to {dtype.value}")


def _trunc_div(a: int, b: int) -> int:
    q = a // b
    if q < 0 and q * b != a:
        q += 1
    return q


def _quantize_result(dtype: DataType | None, py):
    if dtype is DataType.INT:
        return wrap_int(py, 16)
    if dtype is DataType.DINT:
        return wrap_int(py, 32)
    if dtype is DataType.REAL:
        return quantize_real(py)
    return py


def _unify(at: DataType | None, ap, bt: DataType | None, bp):
    """Unify two operand types for arithmetic/comparison."""
    if at is DataType.BOOL or bt is DataType.BOOL:
        raise RuntimeFault("arithmetic on BOOL is not allowed")
    if at is bt:
        return at, ap, bp
    if at is _UNTYPED:
        return bt, _fit_literal(bt, ap), bp
    if bt is _UNTYPED:
        return at, ap, _fit_literal(at, bp)
    pair = {at, bt}
    if pair == {DataType.INT, DataType.DINT}:
        return DataType.DINT, ap, bp
    if pair == {DataType.REAL, DataType.LREAL}:
        return DataType.LREAL, ap, bp
    raise RuntimeFault(
        f"operands {at.value} and {bt.value} need an explicit conversion")


BUILTINS = {
    "INT_TO_DINT": (DataType.INT, DataType.DINT),
    "INT_TO_REAL": (DataType.INT, DataType.REAL),
    "REAL_TO_LREAL": (DataType.REAL, DataType.LREAL),
    "REAL_TO_INT": (DataType.REAL, DataType.INT),
}


def _call_builtin(name: str, vtype: DataType | None, py) -> tuple[DataType, object]:
    src, dst = BUILTINS[name.upper()]
    if vtype is _UNTYPED:
        py = _fit_literal(src, py)
    elif vtype is not src:
        raise RuntimeFault(
            f"{name.upper()} expects {src.value}, got {vtype.value}")
    if name.upper() == "REAL_TO_INT":
        rounded = round(py)  # ties to even
        if not INT_MIN <= rounded <= INT_MAX:
            raise RuntimeFault(f"REAL_TO_INT overflow on {py!r}")
        return dst, int(rounded)
    if dst is DataType.REAL:
        return dst, quantize_real(float(py))
    if dst is DataType.LREAL:
        return dst, float(py)
    return dst, py


class Instance:
    """One FB instance (or the program itself): scalars plus child FBs."""

    __slots__ = ("unit", "path", "vars", "children", "_canon")

    def __init__(self, unit: StUnit, path: str, fb_units: dict[str, StUnit],
                 building: tuple[str, ...] = ()):
        if unit.name.lower() in building:
            raise StSyntaxError(
                f"instance type cycle through '{unit.name}'", 0, 0)
        self.unit = unit
        self.path = path
        self.vars: dict[str, Value] = {}
        self.children: dict[str, "Instance"] = {}
        self._canon: dict[str, str] = {}
        for decl in unit.declarations():
            key = decl.name.lower()
            self._canon[key] = decl.name
            dtype = decl.data_type
            if dtype is not None:
                if decl.init is not None:
                    lt, lp = _lit_value(decl.init)
                    try:
                        self.vars[decl.name] = convert_for_assign(dtype, lt, lp)
                    except RuntimeFault as exc:
                        raise StSyntaxError(
                            f"bad initializer for '{decl.name}': {exc.message}",
                            0, 0)
                else:
                    self.vars[decl.name] = default_value(dtype)
            else:
                child_unit = fb_units.get(decl.type_name.lower())
                if child_unit is None:
                    raise StSyntaxError(
                        f"unknown type '{decl.type_name}' for '{decl.name}'",
                        0, 0)
                self.children[decl.name] = Instance(
                    child_unit, f"{path}.{decl.name}", fb_units,
                    building + (unit.name.lower(),))

    def canonical(self, name: str) -> str | None:
        return self._canon.get(name.lower())

    def flatten(self, image: dict[str, Value]) -> None:
        for name, value in self.vars.items():
            image[f"{self.path}.{name}"] = value
        for child in self.children.values():
            child.flatten(image)


@dataclass
class Frame:
    stmts: list[Stmt]
    pos: int
    scope: Instance
    artifact: str  # breakpoint namespace: FB type name or program name


@dataclass(frozen=True)
class BreakpointHit:
    artifact: str
    index: int
    path: str  # instance path of the paused scope


class NodeRuntime:
    """Scan-cycle execution state for one node."""

    def __init__(self, node_id: str, display_name: str, program: StUnit,
                 fb_units: dict[str, StUnit], fc_units: dict[str, StUnit]):
        self.node_id = node_id
        self.display_name = display_name
        self.fb_units = {u.name.lower(): u for u in fb_units.values()}
        self.fc_units = {u.name.lower(): u for u in fc_units.values()}
        check_unit(program, self.fb_units, self.fc_units)
        for unit in fb_units.values():
            check_unit(unit, self.fb_units, self.fc_units)
        for unit in fc_units.values():
            check_unit(unit, self.fb_units, self.fc_units)
        self.program = Instance(program, program.name, self.fb_units)
        self.cycle_counter = 0
        self.forces: dict[str, Value] = {}
        self.breakpoints: set[tuple[str, int]] = set()
        self.frames: list[Frame] = []
        self.executed = 0  # statements executed during the current scan
        self._in_scan = False
        self._skip_breakpoint_once = False
        self.static_bound = static_scan_bound(program, self.fb_units,
                                              self.fc_units)

    # -- name access ------------------------------------------------------

    def _resolve_owner(self, scope: Instance, name: Name) -> tuple[Instance, str]:
        owner = scope
        for part in name.parts[:-1]:
            child = owner.children.get(owner.canonical(part) or part)
            if child is None:
                raise RuntimeFault(f"'{part}' is not an instance")
            owner = child
        canonical = owner.canonical(name.parts[-1])
        if canonical is None or canonical not in owner.vars:
            raise RuntimeFault(f"unknown variable '{name}'")
        return owner, canonical

    def read(self, scope: Instance, name: Name) -> Value:
        owner, canonical = self._resolve_owner(scope, name)
        return owner.vars[canonical]

    def write(self, scope: Instance, name: Name, vtype, py) -> None:
        owner, canonical = self._resolve_owner(scope, name)
        target_type = owner.vars[canonical].type
        value = convert_for_assign(target_type, vtype, py)
        forced = self.forces.get(f"{owner.path}.{canonical}")
        owner.vars[canonical] = forced if forced is not None else value

    def find_path(self, path: str) -> tuple[Instance, str] | None:
        """Resolve 'Program.a.b.var' (case-insensitive) to (owner, name)."""
        parts = path.split(".")
        if not parts or parts[0].lower() != self.program.unit.name.lower():
            return None
        owner = self.program
        for i, part in enumerate(parts[1:], start=1):
            canonical = owner.canonical(part)
            if canonical is None:
                return None
            if canonical in owner.vars:
                if i == len(parts) - 1:
                    return owner, canonical
                return None
            child = owner.children.get(canonical)
            if child is None:
                return None
            owner = child
        return None

    def set_force(self, path: str, raw) -> str:
        found = self.find_path(path)
        if found is None:
            raise KeyError(path)
        owner, canonical = found
        value = coerce_scalar(owner.vars[canonical].type, raw, path)
        full = f"{owner.path}.{canonical}"
        self.forces[full] = value
        owner.vars[canonical] = value
        return full

    def clear_force(self, path: str) -> str:
        found = self.find_path(path)
        if found is None:
            raise KeyError(path)
        owner, canonical = found
        full = f"{owner.path}.{canonical}"
        self.forces.pop(full, None)
        return full

    def image(self) -> dict[str, Value]:
        out: dict[str, Value] = {}
        self.program.flatten(out)
        return out

    # -- scan machinery ----------------------------------------------------

    def start_scan(self, stimulus: dict[str, Value] | None = None) -> None:
        if self._in_scan:
            raise RuntimeFault("scan already in progress")
        self.executed = 0
        if stimulus:
            for name, value in stimulus.items():
                canonical = self.program.canonical(name)
                if canonical is None or canonical not in self.program.vars:
                    raise RuntimeFault(
                        f"stimulus names unknown variable '{name}'")
                self.write(self.program, Name((canonical,)),
                           value.type, value.py)
        for full, value in self.forces.items():
            found = self.find_path(full)
            if found is not None:
                owner, canonical = found
                owner.vars[canonical] = value
        self.frames = [Frame(self.program.unit.body, 0, self.program,
                             self.program.unit.name)]
        self._in_scan = True
        self._skip_breakpoint_once = False

    def scanning(self) -> bool:
        return self._in_scan

    def current_location(self) -> tuple[str, int, str] | None:
        self._drop_finished()
        if not self.frames:
            return None
        frame = self.frames[-1]
        stmt = frame.stmts[frame.pos]
        return frame.artifact, stmt.index, frame.scope.path

    def _drop_finished(self) -> None:
        while self.frames and self.frames[-1].pos >= len(self.frames[-1].stmts):
            self.frames.pop()

    def _finish_if_done(self) -> None:
        self._drop_finished()
        if self._in_scan and not self.frames:
            self._in_scan = False
            self.cycle_counter += 1

    def step(self) -> BreakpointHit | None:
        """Execute at most one statement; report a breakpoint instead of
        executing its statement."""
        self._finish_if_done()
        if not self.frames:
            return None
        frame = self.frames[-1]
        stmt = frame.stmts[frame.pos]
        key = (frame.artifact.lower(), stmt.index)
        if key in self.breakpoints and not self._skip_breakpoint_once:
            self._skip_breakpoint_once = True
            return BreakpointHit(frame.artifact, stmt.index, frame.scope.path)
        self._skip_breakpoint_once = False
        try:
            self._execute(frame, stmt)
        except RuntimeFault as fault:
            if fault.artifact is None:
                fault.artifact = frame.artifact
                fault.index = stmt.index
            fault.node = fault.node or self.display_name
            self.frames = []
            self._in_scan = False
            raise
        self._finish_if_done()
        return None

    def run_scan(self) -> BreakpointHit | None:
        while self._in_scan:
            hit = self.step()
            if hit is not None:
                return hit
        return None

    def _execute(self, frame: Frame, stmt: Stmt) -> None:
        self.executed += 1
        if isinstance(stmt, Assign):
            vtype, py = self._eval(frame.scope, stmt.expr)
            frame.pos += 1
            self.write(frame.scope, stmt.target, vtype, py)
        elif isinstance(stmt, CallStmt):
            canonical = frame.scope.canonical(stmt.name)
            child = frame.scope.children.get(canonical or stmt.name)
            if child is None:
                raise RuntimeFault(f"'{stmt.name}' is not an FB instance")
            frame.pos += 1
            for pname, expr in stmt.args:
                vtype, py = self._eval(frame.scope, expr)
                self.write(child, Name((pname,)), vtype, py)
            self.frames.append(Frame(child.unit.body, 0, child,
                                     child.unit.name))
        elif isinstance(stmt, If):
            frame.pos += 1
            for cond, body in stmt.branches:
                if cond is None:
                    self.frames.append(Frame(body, 0, frame.scope,
                                             frame.artifact))
                    return
                vtype, py = self._eval(frame.scope, cond)
                if vtype is not DataType.BOOL:
                    raise RuntimeFault("IF condition must be BOOL")
                if py:
                    self.frames.append(Frame(body, 0, frame.scope,
                                             frame.artifact))
                    return
        else:  # pragma: no cover
            raise RuntimeFault(f"unsupported statement {stmt!r}")

    # -- expressions --------------------------------------------------------

    def _eval(self, scope: Instance, expr) -> tuple[DataType | None, object]:
        if isinstance(expr, Lit):
            return _lit_value(expr)
        if isinstance(expr, Name):
            value = self.read(scope, expr)
            return value.type, value.py
        if isinstance(expr, st.Unary):
            vtype, py = self._eval(scope, expr.operand)
            if expr.op == "NOT":
                if vtype is not DataType.BOOL:
                    raise RuntimeFault("NOT needs a BOOL operand")
                return DataType.BOOL, not py
            if vtype is DataType.BOOL:
                raise RuntimeFault("arithmetic on BOOL is not allowed")
            py = -py if expr.op == "-" else py
            return vtype, _quantize_result(vtype, py)
        if isinstance(expr, st.Binary):
            return self._eval_binary(scope, expr)
        if isinstance(expr, Call):
            return self._eval_call(scope, expr)
        raise RuntimeFault(f"unsupported expression {expr!r}")  # pragma: no cover

    def _eval_binary(self, scope: Instance, expr) -> tuple[DataType | None, object]:
        at, ap = self._eval(scope, expr.left)
        bt, bp = self._eval(scope, expr.right)
        return _apply_binary(expr.op, at, ap, bt, bp)

    def _eval_call(self, scope: Instance, call: Call) -> tuple[DataType | None, object]:
        upper = call.name.upper()
        if upper in BUILTINS:
            if len(call.args) != 1 or call.args[0][0] is not None:
                raise RuntimeFault(
                    f"{upper} takes exactly one positional argument")
            vtype, py = self._eval(scope, call.args[0][1])
            return _call_builtin(upper, vtype, py)
        unit = self.fc_units.get(call.name.lower())
        if unit is None:
            raise RuntimeFault(f"unknown function '{call.name}'")
        return self._eval_fc(scope, unit, call)

    def _eval_fc(self, scope: Instance, unit: StUnit,
                 call: Call) -> tuple[DataType, object]:
        locals_: dict[str, Value] = {}
        canon: dict[str, str] = {}
        for decl in unit.declarations():
            dtype = decl.data_type
            if dtype is None:
                raise RuntimeFault(
                    f"function '{unit.name}' declares non-scalar '{decl.name}'")
            canon[decl.name.lower()] = decl.name
            if decl.init is not None:
                lt, lp = _lit_value(decl.init)
                locals_[decl.name] = convert_for_assign(dtype, lt, lp)
            else:
                locals_[decl.name] = default_value(dtype)
        result_name = unit.name
        canon[result_name.lower()] = result_name
        locals_[result_name] = default_value(unit.return_type)

        inputs = unit.inputs
        for position, (pname, expr) in enumerate(call.args):
            if pname is None:
                if position >= len(inputs):
                    raise RuntimeFault(
                        f"too many arguments for '{unit.name}'")
                target = inputs[position].name
            else:
                target = canon.get(pname.lower())
                if target is None or all(d.name != target for d in inputs):
                    raise RuntimeFault(
                        f"'{unit.name}' has no input '{pname}'")
            vtype, py = self._eval(scope, expr)
            locals_[target] = convert_for_assign(locals_[target].type,
                                                 vtype, py)

        self._exec_atomic(unit, locals_, canon, unit.body)
        result = locals_[result_name]
        return result.type, result.py

    def _exec_atomic(self, unit: StUnit, locals_: dict[str, Value],
                     canon: dict[str, str], stmts: list[Stmt]) -> None:
        """FC bodies run without frames: no breakpoints inside functions."""
        for stmt in stmts:
            self.executed += 1
            if isinstance(stmt, Assign):
                if len(stmt.target.parts) != 1:
                    raise RuntimeFault(
                        f"'{stmt.target}' is not assignable in a function")
                target = canon.get(stmt.target.parts[0].lower())
                if target is None:
                    raise RuntimeFault(f"unknown variable '{stmt.target}'")
                vtype, py = self._eval_fc_expr(locals_, canon, stmt.expr)
                locals_[target] = convert_for_assign(locals_[target].type,
                                                     vtype, py)
            elif isinstance(stmt, If):
                for cond, body in stmt.branches:
                    if cond is None:
                        self._exec_atomic(unit, locals_, canon, body)
                        break
                    vtype, py = self._eval_fc_expr(locals_, canon, cond)
                    if vtype is not DataType.BOOL:
                        raise RuntimeFault("IF condition must be BOOL")
                    if py:
                        self._exec_atomic(unit, locals_, canon, body)
                        break
            else:
                raise RuntimeFault(
                    "functions cannot invoke FB instances")

    def _eval_fc_expr(self, locals_: dict[str, Value], canon: dict[str, str],
                      expr) -> tuple[DataType | None, object]:
        if isinstance(expr, Lit):
            return _lit_value(expr)
        if isinstance(expr, Name):
            if len(expr.parts) != 1:
                raise RuntimeFault(f"'{expr}' has no members")
            target = canon.get(expr.parts[0].lower())
            if target is None:
                raise RuntimeFault(f"unknown variable '{expr}'")
            value = locals_[target]
            return value.type, value.py
        if isinstance(expr, st.Unary):
            vtype, py = self._eval_fc_expr(locals_, canon, expr.operand)
            if expr.op == "NOT":
                if vtype is not DataType.BOOL:
                    raise RuntimeFault("NOT needs a BOOL operand")
                return DataType.BOOL, not py
            if vtype is DataType.BOOL:
                raise RuntimeFault("arithmetic on BOOL is not allowed")
            py = -py if expr.op == "-" else py
            return vtype, _quantize_result(vtype, py)
        if isinstance(expr, st.Binary):
            at, ap = self._eval_fc_expr(locals_, canon, expr.left)
            bt, bp = self._eval_fc_expr(locals_, canon, expr.right)
            return _apply_binary(expr.op, at, ap, bt, bp)
        if isinstance(expr, Call):
            upper = expr.name.upper()
            if upper in BUILTINS:
                if len(expr.args) != 1 or expr.args[0][0] is not None:
                    raise RuntimeFault(
                        f"{upper} takes exactly one positional argument")
                vtype, py = self._eval_fc_expr(locals_, canon, expr.args[0][1])
                return _call_builtin(upper, vtype, py)
            raise RuntimeFault(
                f"functions may call only conversions, not '{expr.name}'")
        raise RuntimeFault(f"unsupported expression {expr!r}")  # pragma: no cover

def _apply_binary(op, at, ap, bt, bp):
    if op in ("AND", "OR", "XOR"):
        if at is not DataType.BOOL or bt is not DataType.BOOL:
            raise RuntimeFault(f"{op} needs BOOL operands")
        result = {"AND": ap and bp, "OR": ap or bp,
                  "XOR": bool(ap) != bool(bp)}[op]
        return DataType.BOOL, bool(result)
    if op in ("=", "<>"):
        if (at is DataType.BOOL) != (bt is DataType.BOOL):
            raise RuntimeFault("cannot compare BOOL with a number")
        if at is DataType.BOOL:
            eq = ap == bp
        else:
            _, ua, ub = _unify(at, ap, bt, bp)
            eq = ua == ub
        return DataType.BOOL, eq if op == "=" else not eq
    if op in ("<", ">", "<=", ">="):
        _, ua, ub = _unify(at, ap, bt, bp)
        result = {"<": ua < ub, ">": ua > ub,
                  "<=": ua <= ub, ">=": ua >= ub}[op]
        return DataType.BOOL, result
    rtype, ua, ub = _unify(at, ap, bt, bp)
    integral = rtype in (DataType.INT, DataType.DINT) or (
        rtype is _UNTYPED and isinstance(ua, int) and isinstance(ub, int))
    if op == "+":
        py = ua + ub
    elif op == "-":
        py = ua - ub
    elif op == "*":
        py = ua * ub
    elif op == "/":
        if ub == 0:
            raise RuntimeFault("division by zero")
        py = _trunc_div(ua, ub) if integral else ua / ub
    elif op == "MOD":
        if not integral:
            raise RuntimeFault("MOD needs integer operands")
        if ub == 0:
            raise RuntimeFault("MOD by zero")
        py = ua - _trunc_div(ua, ub) * ub
    else:  # pragma: no cover
        raise RuntimeFault(f"unsupported operator {op}")
    return rtype, _quantize_result(rtype, py)


# -- static checks -----------------------------------------------------------


def _decl_env(unit: StUnit, fb_units: dict[str, StUnit]) -> dict[str, object]:
    env: dict[str, object] = {}
    for decl in unit.declarations():
        dtype = decl.data_type
        if dtype is not None:
            env[decl.name.lower()] = dtype
        else:
            child = fb_units.get(decl.type_name.lower())
            if child is None:
                raise StSyntaxError(
                    f"unknown type '{decl.type_name}' for '{decl.name}' "
                    f"in {unit.name}", 0, 0)
            env[decl.name.lower()] = child
    if unit.kind is UnitKind.FUNCTION:
        env[unit.name.lower()] = unit.return_type
    return env


def _check_name(name: Name, env: dict[str, object],
                fb_units: dict[str, StUnit], unit_name: str) -> None:
    entry = env.get(name.parts[0].lower())
    if entry is None:
        raise StSyntaxError(
            f"unknown name '{name}' in {unit_name}", 0, 0)
    for part in name.parts[1:]:
        if not isinstance(entry, StUnit):
            raise StSyntaxError(
                f"'{name}' dereferences a scalar in {unit_name}", 0, 0)
        entry = _decl_env(entry, fb_units).get(part.lower())
        if entry is None:
            raise StSyntaxError(
                f"unknown member in '{name}' in {unit_name}", 0, 0)


def _check_expr(expr, env, fb_units, fc_units, unit_name) -> None:
    names, calls = st.expression_names(expr)
    for name in names:
        _check_name(name, env, fb_units, unit_name)
    for call in calls:
        if call.name.upper() in BUILTINS:
            continue
        target = fc_units.get(call.name.lower())
        if target is None:
            raise StSyntaxError(
                f"unknown function '{call.name}' in {unit_name}", 0, 0)
        inputs = {d.name.lower() for d in target.inputs}
        for pname, _ in call.args:
            if pname is not None and pname.lower() not in inputs:
                raise StSyntaxError(
                    f"'{call.name}' has no input '{pname}' in {unit_name}",
                    0, 0)


def check_unit(unit: StUnit, fb_units: dict[str, StUnit],
               fc_units: dict[str, StUnit]) -> None:
    """Static link check: every referenced name must be declared."""
    env = _decl_env(unit, fb_units)
    if unit.kind is UnitKind.FUNCTION:
        for decl in unit.declarations():
            if decl.data_type is None:
                raise StSyntaxError(
                    f"function '{unit.name}' declares non-scalar "
                    f"'{decl.name}'", 0, 0)
    for stmt in st.iter_statements(unit.body):
        if isinstance(stmt, Assign):
            _check_name(stmt.target, env, fb_units, unit.name)
            _check_expr(stmt.expr, env, fb_units, fc_units, unit.name)
        elif isinstance(stmt, CallStmt):
            entry = env.get(stmt.name.lower())
            if not isinstance(entry, StUnit):
                raise StSyntaxError(
                    f"'{stmt.name}' is not an FB instance in {unit.name}",
                    0, 0)
            child_env = _decl_env(entry, fb_units)
            for pname, expr in stmt.args:
                if not isinstance(child_env.get(pname.lower()), DataType):
                    raise StSyntaxError(
                        f"'{stmt.name}' has no scalar input '{pname}' "
                        f"in {unit.name}", 0, 0)
                _check_expr(expr, env, fb_units, fc_units, unit.name)
        elif isinstance(stmt, If):
            for cond, _ in stmt.branches:
                if cond is not None:
                    _check_expr(cond, env, fb_units, fc_units, unit.name)


def _expr_call_cost(expr, fc_units: dict[str, StUnit]) -> int:
    _, calls = st.expression_names(expr)
    total = 0
    for call in calls:
        target = fc_units.get(call.name.lower())
        if target is not None:
            total += target.statement_count
            for _, arg in call.args:
                total += _expr_call_cost(arg, fc_units)
    return total


def static_scan_bound(unit: StUnit, fb_units: dict[str, StUnit],
                      fc_units: dict[str, StUnit],
                      stack: tuple[str, ...] = ()) -> int:
    """Upper bound on statements executed by one scan of `unit`."""
    if unit.name.lower() in stack:
        return 0  # instance cycles are rejected elsewhere
    total = 0
    for stmt in st.iter_statements(unit.body):
        total += 1
        if isinstance(stmt, Assign):
            total += _expr_call_cost(stmt.expr, fc_units)
        elif isinstance(stmt, CallStmt):
            child = None
            for decl in unit.declarations():
                if decl.name.lower() == stmt.name.lower() and decl.data_type is None:
                    child = fb_units.get(decl.type_name.lower())
            if child is not None:
                total += static_scan_bound(child, fb_units, fc_units,
                                           stack + (unit.name.lower(),))
            for _, expr in stmt.args:
                total += _expr_call_cost(expr, fc_units)
        elif isinstance(stmt, If):
            for cond, _ in stmt.branches:
                if cond is not None:
                    total += _expr_call_cost(cond, fc_units)
    return total
