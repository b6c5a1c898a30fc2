"""Model-to-text transformation onto IEC 61131-3 Structured Text.

PersistentBlocks become FUNCTION_BLOCKs, TransientBlocks become FUNCTIONs,
and each node with allocated software applications gets one PROGRAM that
wires device and exchange variables around the ordered FB invocations.
All emission is deterministic: same model, same bytes.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import names
from .comm import CommConfig, derive_pubsub, emit_comm_config
from .diagnostics import (
    Diagnostic,
    E_BODY_PARSE,
    E_FC_OUT_COUNT,
    E_LOOP_FORBIDDEN,
    E_UNBOUND_FC_PARAM,
    E_VALIDATION_FAILED,
)
from .model import (
    ConnectionKind,
    DataType,
    Model,
    Node,
    PersistentBlock,
    ResolvedModel,
    Scalar,
    SoftwareApplication,
    TransientBlock,
)
from .st import parser as st_parser

GENERATED_HEADER = "(* GENERATED - DO NOT EDIT *)"
INDENT = "    "


class CodegenError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics

    @classmethod
    def single(cls, code: str, path: str, message: str) -> "CodegenError":
        return cls([Diagnostic.error(code, path, message)])


class ArtifactKind(Enum):
    FUNCTION_BLOCK = "FUNCTION_BLOCK"
    FUNCTION = "FUNCTION"
    PROGRAM = "PROGRAM"


@dataclass
class StArtifact:
    kind: ArtifactKind
    name: str
    declaration_text: str
    implementation_text: str

    def full_text(self) -> str:
        parts = [GENERATED_HEADER, self.declaration_text]
        if self.implementation_text:
            parts.append(self.implementation_text)
        parts.append(f"END_{self.kind.value}")
        return "\n".join(parts) + "\n"


@dataclass
class GeneratedProject:
    resolved: ResolvedModel
    comm: CommConfig
    per_node: dict[str, list[StArtifact]]  # node id -> artifacts, program last
    node_dirs: dict[str, str]  # node id -> output directory name
    shared: list[str] = field(default_factory=list)  # names used by >1 node

    def node_program(self, node_id: str) -> StArtifact:
        return self.per_node[node_id][-1]


def format_real(value: float) -> str:
    text = repr(float(value))
    if "e" in text:
        mantissa, _, exponent = text.partition("e")
        if "." not in mantissa:
            mantissa += ".0"
        return f"{mantissa}e{exponent}"
    if "." not in text:
        text += ".0"
    return text


def format_literal(value: Scalar, data_type: DataType) -> str:
    if data_type is DataType.BOOL:
        return "TRUE" if value else "FALSE"
    if data_type in (DataType.INT, DataType.DINT):
        return str(int(value))
    return format_real(float(value))


def _var_section(keyword: str, decls: list[str]) -> list[str]:
    if not decls:
        return []
    return [keyword, *[f"{INDENT}{d}" for d in decls], "END_VAR"]


def _rename_identifier(text: str, old: str, new: str) -> str:
    """Replace every identifier token equal to `old` (case-insensitive)."""
    lines = text.split("\n")
    spots: dict[int, list[int]] = {}
    for tok in st_parser.tokenize(text):
        if tok.kind is st_parser.TokKind.IDENT and tok.text.lower() == old.lower():
            spots.setdefault(tok.line - 1, []).append(tok.col - 1)
    for lineno, cols in spots.items():
        line = lines[lineno]
        for col in sorted(cols, reverse=True):
            line = line[:col] + new + line[col + len(old):]
        lines[lineno] = line
    return "\n".join(lines)


def generate_function(tb: TransientBlock) -> StArtifact:
    """FUNCTION from a TransientBlock; the single out parameter becomes the
    function result and its name is rewritten to the function name."""
    where = f"block '{tb.name}'"
    outs = tb.out_params()
    if len(outs) != 1:
        raise CodegenError.single(
            E_FC_OUT_COUNT, where,
            f"a TransientBlock needs exactly one out parameter, found {len(outs)}")
    body_text = "\n".join(tb.body)
    if not body_text.strip():
        raise CodegenError.single(E_BODY_PARSE, where, "body has no statements")
    try:
        st_parser.parse_statements(body_text)
    except st_parser.StSyntaxError as exc:
        code = E_LOOP_FORBIDDEN if exc.code == E_LOOP_FORBIDDEN else E_BODY_PARSE
        raise CodegenError.single(code, where, f"body does not parse: {exc}")

    renamed = _rename_identifier(body_text, outs[0].name, tb.name)
    impl_lines = [f"{INDENT}{line.strip()}" for line in renamed.split("\n")
                  if line.strip()]

    decl_lines = [f"FUNCTION {tb.name} : {outs[0].data_type.value}"]
    decl_lines += _var_section("VAR_INPUT", [
        f"{p.name} : {p.data_type.value};" for p in tb.in_params()
    ])
    return StArtifact(ArtifactKind.FUNCTION, tb.name,
                      "\n".join(decl_lines), "\n".join(impl_lines))


def _render_endpoint(resolved: ResolvedModel, block: PersistentBlock,
                     instance: str, feature: str) -> str:
    ref = resolved.resolve_feature(block, instance, feature)
    if ref is None:  # unreachable after validation
        raise CodegenError.single(
            E_VALIDATION_FAILED, f"block '{block.name}'",
            f"unresolved flow endpoint '{instance}.{feature}'")
    if ref.owner == "self":
        return ref.feature
    return f"{ref.owner}.{ref.feature}"


def _constraint_call(resolved: ResolvedModel, block: PersistentBlock,
                     cp) -> str:
    where = f"block '{block.name}' constraint '{cp.name}'"
    tb = resolved.block_by_id.get(cp.type)
    if not isinstance(tb, TransientBlock):
        raise CodegenError.single(
            E_VALIDATION_FAILED, where, f"'{cp.type}' is not a TransientBlock")
    in_exprs: dict[str, str] = {}
    target: str | None = None
    for flow in block.flows:
        if flow.order_number != 0:
            continue
        if flow.target_instance.lower() == cp.name.lower():
            in_exprs[flow.target_feature.lower()] = _render_endpoint(
                resolved, block, flow.source_instance, flow.source_feature)
        elif flow.source_instance.lower() == cp.name.lower():
            target = _render_endpoint(
                resolved, block, flow.target_instance, flow.target_feature)
    bindings = []
    for param in tb.in_params():
        expr = in_exprs.get(param.name.lower())
        if expr is None:
            raise CodegenError.single(
                E_UNBOUND_FC_PARAM, where,
                f"in parameter '{param.name}' has no zero-order flow")
        bindings.append(f"{param.name} := {expr}")
    if target is None:
        raise CodegenError.single(
            E_UNBOUND_FC_PARAM, where,
            f"out parameter '{tb.out_params()[0].name if tb.out_params() else '?'}' "
            f"has no zero-order flow")
    return f"{target} := {tb.name}({', '.join(bindings)});"


def generate_function_block(pb: PersistentBlock,
                            resolved: ResolvedModel) -> StArtifact:
    """FUNCTION_BLOCK from a PersistentBlock: declarations from ports,
    values and parts; the body processes members sorted by orderNumber,
    skipping everything at or below zero."""
    invoked: list[tuple[int, str]] = []
    for part in pb.parts:
        if part.order_number > 0:
            invoked.append((part.order_number, f"{part.name}();"))
    for cp in pb.constraints:
        if cp.order_number > 0:
            invoked.append((cp.order_number, _constraint_call(resolved, pb, cp)))
    for flow in pb.flows:
        if pb.flow_constraint_owner(flow) is not None or flow.order_number <= 0:
            continue
        source = _render_endpoint(resolved, pb, flow.source_instance,
                                  flow.source_feature)
        target = _render_endpoint(resolved, pb, flow.target_instance,
                                  flow.target_feature)
        invoked.append((flow.order_number, f"{target} := {source};"))
    invoked.sort(key=lambda item: item[0])
    impl_lines = [f"{INDENT}{stmt}" for _, stmt in invoked]

    local_decls = []
    for value in pb.values:
        decl = f"{value.name} : {value.data_type.value}"
        if value.initial_value is not None:
            decl += f" := {format_literal(value.initial_value, value.data_type)}"
        local_decls.append(decl + ";")
    for part in pb.parts:
        target_block = resolved.block_by_id.get(part.type)
        type_name = target_block.name if target_block is not None else part.type
        local_decls.append(f"{part.name} : {type_name};")

    decl_lines = [f"FUNCTION_BLOCK {pb.name}"]
    decl_lines += _var_section("VAR_INPUT", [
        f"{p.name} : {p.data_type.value};" for p in pb.in_ports])
    decl_lines += _var_section("VAR_OUTPUT", [
        f"{p.name} : {p.data_type.value};" for p in pb.out_ports])
    decl_lines += _var_section("VAR", local_decls)
    return StArtifact(ArtifactKind.FUNCTION_BLOCK, pb.name,
                      "\n".join(decl_lines), "\n".join(impl_lines))


def _block_port_name(block: PersistentBlock, port_name: str) -> str:
    for port in [*block.in_ports, *block.out_ports]:
        if port.name.lower() == port_name.lower():
            return port.name
    return port_name


def generate_node_program(node: Node, resolved: ResolvedModel,
                          comm: CommConfig) -> StArtifact:
    """PROGRAM for one node: read device and subscribed variables, invoke
    the SA instances in allocation order, then publish and drive outputs."""
    model = resolved.model
    sas: list[SoftwareApplication] = []
    seen_sas: set[str] = set()
    for alloc in model.allocations:
        if alloc.node != node.id or alloc.sa in seen_sas:
            continue
        sa = resolved.sa_by_id.get(alloc.sa)
        if sa is None or sa.id not in resolved.behavior_of_sa:
            continue
        seen_sas.add(alloc.sa)
        sas.append(sa)

    published = comm.published_by(node.id)
    subscribed = comm.subscribed_by(node.id)
    entry_by_connection = {e.connection_id: e for e in [*published, *subscribed]}

    taken: set[str] = {e.variable.lower() for e in [*published, *subscribed]}
    program_name = names.unique_name("Main", taken)
    instance_of: dict[str, str] = {}
    for sa in sas:
        instance_of[sa.id] = names.unique_name(
            names.sanitize(sa.name) + "_inst", taken)

    reads: list[str] = []
    writes: list[str] = []
    in_vars: list[tuple[str, DataType]] = []
    out_vars: list[tuple[str, DataType]] = []

    for sa in sas:
        block = resolved.behavior_of_sa[sa.id]
        inst = instance_of[sa.id]
        for port in sa.ports:
            member = _block_port_name(block, port.name)
            for conn in model.connections:
                if conn.kind is not ConnectionKind.DATA:
                    continue
                if (conn.target.element == sa.id and conn.target.port is not None
                        and conn.target.port.lower() == port.name.lower()):
                    src_sa = resolved.sa_of_connection_end(conn.source)
                    if src_sa is not None:
                        src_node = resolved.node_of_sa.get(src_sa.id)
                        if src_node is not None and src_node.id == node.id:
                            src_block = resolved.behavior_of_sa.get(src_sa.id)
                            src_inst = instance_of.get(src_sa.id)
                            if src_block is None or src_inst is None:
                                continue
                            src_member = _block_port_name(
                                src_block, conn.source.port or "")
                            reads.append(
                                f"{inst}.{member} := {src_inst}.{src_member};")
                        else:
                            entry = entry_by_connection.get(conn.id)
                            if entry is not None:
                                reads.append(
                                    f"{inst}.{member} := {entry.variable};")
                    else:
                        # device-fed input: a program-level stimulus variable
                        var = names.unique_name(names.sanitize(port.name), taken)
                        in_vars.append((var, port.data_type))
                        reads.append(f"{inst}.{member} := {var};")
                if (conn.source.element == sa.id and conn.source.port is not None
                        and conn.source.port.lower() == port.name.lower()):
                    tgt_sa = resolved.sa_of_connection_end(conn.target)
                    if tgt_sa is None:
                        # device-bound output: a program-level mirror variable
                        var = names.unique_name(names.sanitize(port.name), taken)
                        out_vars.append((var, port.data_type))
                        writes.append(f"{var} := {inst}.{member};")
                    else:
                        entry = entry_by_connection.get(conn.id)
                        if entry is not None and entry.publisher_node == node.id:
                            writes.append(f"{entry.variable} := {inst}.{member};")

    body_lines = reads + [f"{instance_of[sa.id]}();" for sa in sas] + writes
    impl_lines = [f"{INDENT}{line}" for line in body_lines]

    decls = [f"{instance_of[sa.id]} : {resolved.behavior_of_sa[sa.id].name};"
             for sa in sas]
    decls += [f"{name} : {dtype.value};" for name, dtype in in_vars]
    decls += [f"{name} : {dtype.value};" for name, dtype in out_vars]
    decls += [f"{e.variable} : {e.data_type.value};" for e in published]
    decls += [f"{e.variable} : {e.data_type.value};" for e in subscribed]

    decl_lines = [f"PROGRAM {program_name}"]
    decl_lines += _var_section("VAR", decls)
    return StArtifact(ArtifactKind.PROGRAM, program_name,
                      "\n".join(decl_lines), "\n".join(impl_lines))


def _reachable_blocks(resolved: ResolvedModel,
                      roots: list[PersistentBlock]) -> list[str]:
    reach: set[str] = set()
    stack = [b.id for b in roots]
    while stack:
        block_id = stack.pop()
        if block_id in reach:
            continue
        reach.add(block_id)
        block = resolved.block_by_id.get(block_id)
        if isinstance(block, PersistentBlock):
            stack.extend(p.type for p in block.parts)
            stack.extend(c.type for c in block.constraints)
    return [b.id for b in resolved.model.blocks if b.id in reach]


def generate_project(model: Model, allow_widening: bool = False) -> GeneratedProject:
    """Validate, derive the exchange plan and generate every node's
    artifact set.  Validation errors abort before anything is produced."""
    from .validator import validate_model

    resolved, report = validate_model(model, allow_widening)
    if not report.passed:
        raise CodegenError(
            [Diagnostic.error(E_VALIDATION_FAILED, "model",
                              f"validation failed with {len(report.errors)} "
                              f"error(s)"),
             *report.errors])
    comm = derive_pubsub(resolved)

    per_node: dict[str, list[StArtifact]] = {}
    node_dirs: dict[str, str] = {}
    usage: dict[str, int] = {}
    dir_taken: set[str] = set()
    for node in model.nodes:
        roots = []
        seen: set[str] = set()
        for alloc in model.allocations:
            if alloc.node != node.id or alloc.sa in seen:
                continue
            seen.add(alloc.sa)
            block = resolved.behavior_of_sa.get(alloc.sa)
            if block is not None:
                roots.append(block)
        if not roots:
            continue
        artifacts: list[StArtifact] = []
        for block_id in _reachable_blocks(resolved, roots):
            block = resolved.block_by_id[block_id]
            if isinstance(block, TransientBlock):
                artifacts.append(generate_function(block))
            else:
                artifacts.append(generate_function_block(block, resolved))
            usage[block.name] = usage.get(block.name, 0) + 1
        artifacts.append(generate_node_program(node, resolved, comm))
        per_node[node.id] = artifacts
        node_dirs[node.id] = names.unique_name(names.sanitize(node.name),
                                               dir_taken)

    shared = [name for name, count in usage.items() if count > 1]
    return GeneratedProject(resolved, comm, per_node, node_dirs, shared)


def write_project(project: GeneratedProject, out_dir: str | Path) -> list[Path]:
    """Write `<out>/<node>/<artifact>.st` plus `<out>/comm.json`; the node
    directories are replaced wholesale so stale artifacts never linger."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for node_id, artifacts in project.per_node.items():
        node_dir = out / project.node_dirs[node_id]
        if node_dir.exists():
            shutil.rmtree(node_dir)
        node_dir.mkdir()
        for artifact in artifacts:
            path = node_dir / f"{artifact.name}.st"
            path.write_text(artifact.full_text(), encoding="utf-8")
            written.append(path)
    comm_path = out / "comm.json"
    comm_path.write_text(emit_comm_config(project.comm), encoding="utf-8")
    written.append(comm_path)
    return written
