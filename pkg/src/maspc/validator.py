"""Profile validation: block restrictions, connector compatibility and
system-level completeness, traceability and timing lint.

All checks are pure: they take a resolved model and return diagnostics in
document order, so the same model always yields the identical report.
"""

from __future__ import annotations

from .diagnostics import (
    Diagnostic,
    E_AF_NO_SA,
    E_AMBIGUOUS_FC_BINDING,
    E_BODY_PARSE,
    E_DIRECTION,
    E_DUP_ORDER,
    E_FC_FLOW_NONZERO,
    E_FC_OUT_COUNT,
    E_FLOW_ORDER_NONPOSITIVE,
    E_LOOP_FORBIDDEN,
    E_MISSING_ADDRESS,
    E_ORDER_NONPOSITIVE,
    E_PART_CYCLE,
    E_PORT_DIRECTION,
    E_PORT_MISMATCH,
    E_REFINE_CYCLE,
    E_SA_MULTI_ALLOC,
    E_SA_UNALLOCATED,
    E_TYPE_INCOMPAT,
    E_UNBOUND_FC_PARAM,
    W_BUDGET,
    W_CTRL_CROSS_NODE,
    W_NFR_TIME,
    W_REQ_UNTRACED,
    W_WIDEN,
    ValidationReport,
)
from .model import (
    AutomationFunction,
    Block,
    ConnectionKind,
    Model,
    PersistentBlock,
    PortDirection,
    RelationKind,
    RequirementKind,
    ResolvedModel,
    SoftwareApplication,
    TransientBlock,
    refine_cycle,
    resolve_model,
    type_compatible,
)
from .st import parser as st_parser

# Conversion functions callable from TransientBlock bodies and generated code.
BUILTIN_FUNCTIONS = {
    "INT_TO_DINT", "REAL_TO_LREAL", "INT_TO_REAL", "REAL_TO_INT",
}


def _check_transient_body(tb: TransientBlock, path: str) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    text = "\n".join(tb.body)
    if not text.strip():
        diags.append(Diagnostic.error(E_BODY_PARSE, path, "body has no statements"))
        return diags
    try:
        stmts = st_parser.parse_statements(text)
    except st_parser.StSyntaxError as exc:
        code = E_LOOP_FORBIDDEN if exc.code == E_LOOP_FORBIDDEN else E_BODY_PARSE
        diags.append(Diagnostic.error(code, path, f"body does not parse: {exc}"))
        return diags
    if not stmts:
        diags.append(Diagnostic.error(E_BODY_PARSE, path, "body has no statements"))
        return diags
    params = {p.name.lower() for p in tb.params}
    names, calls = st_parser.statement_names(stmts)
    for name in names:
        base = name.parts[0]
        if base.lower() not in params:
            diags.append(Diagnostic.error(
                E_BODY_PARSE, path, f"body references unknown name '{base}'"))
        elif len(name.parts) > 1:
            diags.append(Diagnostic.error(
                E_BODY_PARSE, path, f"'{base}' is scalar and has no member '{name.parts[1]}'"))
    for call in calls:
        if call.name.upper() not in BUILTIN_FUNCTIONS:
            diags.append(Diagnostic.error(
                E_BODY_PARSE, path, f"body calls unknown function '{call.name}'"))
    return diags


def validate_block_restrictions(block: Block) -> list[Diagnostic]:
    """Enforce the profile's ordering restrictions on one block."""
    diags: list[Diagnostic] = []
    if isinstance(block, TransientBlock):
        path = f"block '{block.name}'"
        if len(block.out_params()) != 1:
            diags.append(Diagnostic.error(
                E_FC_OUT_COUNT, path,
                f"a TransientBlock needs exactly one out parameter, found "
                f"{len(block.out_params())}"))
        diags.extend(_check_transient_body(block, path))
        return diags

    path = f"block '{block.name}'"
    # Members and free flows to be invoked share one orderNumber namespace.
    orders: dict[int, str] = {}

    def claim(order: int, what: str, where: str) -> None:
        if order in orders:
            diags.append(Diagnostic.error(
                E_DUP_ORDER, where,
                f"orderNumber {order} already used by {orders[order]}"))
        else:
            orders[order] = what

    for part in block.parts:
        if part.order_number > 0:
            claim(part.order_number, f"part '{part.name}'",
                  f"{path} part '{part.name}'")
    for cp in block.constraints:
        where = f"{path} constraint '{cp.name}'"
        if cp.order_number <= 0:
            diags.append(Diagnostic.error(
                E_ORDER_NONPOSITIVE, where,
                f"constraint '{cp.name}' must have orderNumber > 0, "
                f"found {cp.order_number}"))
        else:
            claim(cp.order_number, f"constraint '{cp.name}'", where)
    for i, flow in enumerate(block.flows):
        where = f"{path} flow #{i}"
        owner = block.flow_constraint_owner(flow)
        if owner is not None:
            if flow.order_number != 0:
                diags.append(Diagnostic.error(
                    E_FC_FLOW_NONZERO, where,
                    f"flow attached to constraint '{owner}' must have "
                    f"orderNumber 0, found {flow.order_number}"))
        elif flow.order_number <= 0:
            diags.append(Diagnostic.error(
                E_FLOW_ORDER_NONPOSITIVE, where,
                f"free flow must have orderNumber > 0, found {flow.order_number}"))
        else:
            claim(flow.order_number, f"flow #{i}", where)
    return diags


def _check_feature_pair(resolved: ResolvedModel, block: PersistentBlock, i: int,
                        flow, allow_widening: bool) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    where = f"block '{block.name}' flow #{i}"
    src = resolved.resolve_feature(block, flow.source_instance, flow.source_feature)
    tgt = resolved.resolve_feature(block, flow.target_instance, flow.target_feature)
    if src is None or tgt is None:
        return diags  # unresolved endpoints already reported by resolve_model
    if not src.readable:
        diags.append(Diagnostic.error(
            E_DIRECTION, where,
            f"'{flow.source_instance}.{flow.source_feature}' is not readable"))
    if not tgt.writable:
        diags.append(Diagnostic.error(
            E_DIRECTION, where,
            f"'{flow.target_instance}.{flow.target_feature}' is not writable"))
    if src.data_type is tgt.data_type:
        return diags
    diags.append(_type_pair_diag(src.data_type, tgt.data_type, where,
                                 allow_widening))
    return diags


def _type_pair_diag(src_type, tgt_type, where: str,
                    allow_widening: bool) -> Diagnostic:
    if type_compatible(src_type, tgt_type, allow_widening=True):
        if allow_widening:
            return Diagnostic.warning(
                W_WIDEN, where,
                f"{src_type.value} widens to {tgt_type.value}")
        return Diagnostic.error(
            E_TYPE_INCOMPAT, where,
            f"{src_type.value} does not match {tgt_type.value} "
            f"(widening not enabled)")
    return Diagnostic.error(
        E_TYPE_INCOMPAT, where,
        f"{src_type.value} is not compatible with {tgt_type.value}")


def validate_connections(resolved: ResolvedModel,
                         allow_widening: bool = False) -> list[Diagnostic]:
    """Type- and direction-check every data connection and every flow."""
    diags: list[Diagnostic] = []
    for conn in resolved.model.connections:
        if conn.kind is not ConnectionKind.DATA:
            continue
        where = f"connection '{conn.id}'"
        src_port = resolved.port_of(conn.source)
        tgt_port = resolved.port_of(conn.target)
        if src_port is None or tgt_port is None:
            continue  # unresolved ports already reported by resolve_model
        if src_port.direction is not PortDirection.OUT:
            diags.append(Diagnostic.error(
                E_DIRECTION, where,
                f"source port '{src_port.name}' is not an out port"))
        if tgt_port.direction is not PortDirection.IN:
            diags.append(Diagnostic.error(
                E_DIRECTION, where,
                f"target port '{tgt_port.name}' is not an in port"))
        if src_port.data_type is tgt_port.data_type:
            continue
        diags.append(_type_pair_diag(src_port.data_type, tgt_port.data_type,
                                     where, allow_widening))
    for block in resolved.model.blocks:
        if not isinstance(block, PersistentBlock):
            continue
        for i, flow in enumerate(block.flows):
            diags.extend(_check_feature_pair(resolved, block, i, flow,
                                             allow_widening))
    return diags


def _constraint_binding_diags(resolved: ResolvedModel,
                              block: PersistentBlock) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for cp in block.constraints:
        tb = resolved.block_by_id.get(cp.type)
        if not isinstance(tb, TransientBlock):
            continue
        where = f"block '{block.name}' constraint '{cp.name}'"
        in_flows = [f for f in block.flows
                    if f.target_instance.lower() == cp.name.lower()
                    and f.order_number == 0]
        out_flows = [f for f in block.flows
                     if f.source_instance.lower() == cp.name.lower()
                     and f.order_number == 0]
        bound = {}
        for flow in in_flows:
            key = flow.target_feature.lower()
            if key in bound:
                diags.append(Diagnostic.error(
                    E_AMBIGUOUS_FC_BINDING, where,
                    f"in parameter '{flow.target_feature}' bound by more than "
                    f"one flow"))
            bound[key] = flow
        for param in tb.in_params():
            if param.name.lower() not in bound:
                diags.append(Diagnostic.error(
                    E_UNBOUND_FC_PARAM, where,
                    f"in parameter '{param.name}' has no zero-order flow"))
        out_names = [f.source_feature.lower() for f in out_flows]
        for param in tb.out_params():
            uses = out_names.count(param.name.lower())
            if uses == 0:
                diags.append(Diagnostic.error(
                    E_UNBOUND_FC_PARAM, where,
                    f"out parameter '{param.name}' has no zero-order flow"))
            elif uses > 1:
                diags.append(Diagnostic.error(
                    E_AMBIGUOUS_FC_BINDING, where,
                    f"out parameter '{param.name}' bound by more than one flow"))
    return diags


def _sa_behavior_port_diags(resolved: ResolvedModel,
                            sa: SoftwareApplication) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    block = resolved.behavior_of_sa.get(sa.id)
    if block is None:
        return diags
    where = f"sa '{sa.name}'"
    block_ports = {p.name.lower(): (p, PortDirection.IN) for p in block.in_ports}
    block_ports.update(
        {p.name.lower(): (p, PortDirection.OUT) for p in block.out_ports})
    for port in sa.ports:
        entry = block_ports.get(port.name.lower())
        if entry is None:
            diags.append(Diagnostic.error(
                E_PORT_MISMATCH, where,
                f"port '{port.name}' has no counterpart on block '{block.name}'"))
            continue
        block_port, direction = entry
        if direction is not port.direction:
            diags.append(Diagnostic.error(
                E_PORT_MISMATCH, where,
                f"port '{port.name}' direction differs from block "
                f"'{block.name}'"))
        if block_port.data_type is not port.data_type:
            diags.append(Diagnostic.error(
                E_PORT_MISMATCH, where,
                f"port '{port.name}' is {port.data_type.value} but block port "
                f"is {block_port.data_type.value}"))
    return diags


def _af_realized(resolved: ResolvedModel, af: AutomationFunction,
                 visiting: set[str]) -> bool:
    if af.id in visiting:
        return False
    visiting.add(af.id)
    for child in af.children:
        element = resolved.element_by_id.get(child)
        if isinstance(element, SoftwareApplication):
            return True
        if isinstance(element, AutomationFunction) and _af_realized(
                resolved, element, visiting):
            return True
    return False


def _part_cycle_diags(resolved: ResolvedModel) -> list[Diagnostic]:
    """Part containment must be acyclic or FB instance trees never bottom
    out."""
    diags: list[Diagnostic] = []
    edges: dict[str, list[str]] = {}
    for block in resolved.model.blocks:
        if isinstance(block, PersistentBlock):
            edges[block.id] = [p.type for p in block.parts]
    state: dict[str, int] = {}  # 1 visiting, 2 done

    def visit(block_id: str) -> bool:
        if state.get(block_id) == 1:
            return True
        if state.get(block_id) == 2 or block_id not in edges:
            return False
        state[block_id] = 1
        hit = any(visit(t) for t in edges[block_id])
        state[block_id] = 2
        return hit

    for block in resolved.model.blocks:
        if isinstance(block, PersistentBlock) and block.id not in state:
            if visit(block.id):
                diags.append(Diagnostic.error(
                    E_PART_CYCLE, f"block '{block.name}'",
                    f"part containment starting at '{block.name}' is cyclic"))
    return diags


def validate_system(resolved: ResolvedModel) -> list[Diagnostic]:
    """Completeness and traceability: allocations, realization, tracing,
    addressing of cross-node communication, device port directions."""
    diags: list[Diagnostic] = []
    model = resolved.model

    allocated: set[str] = set()
    for i, alloc in enumerate(model.allocations):
        if alloc.sa in allocated:
            diags.append(Diagnostic.error(
                E_SA_MULTI_ALLOC, f"allocations[{i}]",
                f"sa '{alloc.sa}' is allocated more than once"))
        allocated.add(alloc.sa)
    for sa in model.sas:
        if sa.id not in resolved.node_of_sa:
            diags.append(Diagnostic.error(
                E_SA_UNALLOCATED, f"sa '{sa.name}'",
                f"sa '{sa.name}' is not allocated to any node"))
        diags.extend(_sa_behavior_port_diags(resolved, sa))

    for af in model.afs:
        if not _af_realized(resolved, af, set()):
            diags.append(Diagnostic.error(
                E_AF_NO_SA, f"af '{af.name}'",
                f"af '{af.name}' has no realizing sa"))

    refined: set[str] = set()
    validated: set[str] = set()
    for rel in model.relations:
        if rel.kind is RelationKind.REFINE:
            refined.add(rel.target)
        else:
            validated.add(rel.source)
            validated.add(rel.target)
    for req in model.requirements:
        if req.kind is not RequirementKind.FUNCTIONAL:
            continue
        if req.id not in refined and req.id not in validated:
            diags.append(Diagnostic.warning(
                W_REQ_UNTRACED, f"requirement '{req.name}'",
                f"functional requirement '{req.name}' has no refine or "
                f"validity link"))

    cycle = refine_cycle(model)
    if cycle is not None:
        diags.append(Diagnostic.error(
            E_REFINE_CYCLE, "relations",
            "refine relations form a cycle: " + " -> ".join(cycle)))

    for conn in model.connections:
        src_sa = resolved.sa_of_connection_end(conn.source)
        tgt_sa = resolved.sa_of_connection_end(conn.target)
        if src_sa is None or tgt_sa is None:
            continue
        src_node = resolved.node_of_sa.get(src_sa.id)
        tgt_node = resolved.node_of_sa.get(tgt_sa.id)
        if src_node is None or tgt_node is None or src_node.id == tgt_node.id:
            continue
        where = f"connection '{conn.id}'"
        if conn.kind is ConnectionKind.CONTROL:
            diags.append(Diagnostic.warning(
                W_CTRL_CROSS_NODE, where,
                f"control connection crosses nodes '{src_node.name}' and "
                f"'{tgt_node.name}'; no exchange variable is derived"))
            continue
        if conn.kind is not ConnectionKind.DATA:
            continue
        for node in (src_node, tgt_node):
            if node.ams_net_id is None and not node.bus_address:
                diags.append(Diagnostic.error(
                    E_MISSING_ADDRESS, where,
                    f"node '{node.name}' has neither amsNetId nor bus address"))

    for device, want in [*( (s, PortDirection.OUT) for s in model.sensors),
                         *( (a, PortDirection.IN) for a in model.actuators)]:
        for port in device.ports:
            if port.direction is not want:
                diags.append(Diagnostic.error(
                    E_PORT_DIRECTION, f"device '{device.name}'",
                    f"port '{port.name}' must be {want.value}-direction"))
    return diags


def check_timing_budget(resolved: ResolvedModel) -> list[Diagnostic]:
    """Additive execution-time lint per node plus response-time bounds
    linked to requirements by validity relations."""
    diags: list[Diagnostic] = []
    model = resolved.model

    per_node: dict[str, float] = {}
    for sa in model.sas:
        node = resolved.node_of_sa.get(sa.id)
        if node is None or sa.execution_time_ms is None:
            continue
        per_node[node.id] = per_node.get(node.id, 0.0) + sa.execution_time_ms
    for node in model.nodes:
        total = per_node.get(node.id)
        if total is not None and total > node.cycle_time_ms:
            diags.append(Diagnostic.warning(
                W_BUDGET, f"node '{node.name}'",
                f"allocated execution time {total:g} ms exceeds cycle time "
                f"{node.cycle_time_ms:g} ms"))

    # A millisecond-unit property on a requirement bounds the execution time
    # of every sa reachable from the elements its validity relations touch.
    for req in model.requirements:
        bounds = [p for p in req.properties if p.unit == "ms"
                  and isinstance(p.value, (int, float))]
        if not bounds:
            continue
        linked_sas: list[SoftwareApplication] = []
        for rel in model.relations:
            if rel.kind is not RelationKind.VALIDITY or rel.source != req.id:
                continue
            element = resolved.element_by_id.get(rel.target)
            if isinstance(element, SoftwareApplication):
                linked_sas.append(element)
            elif isinstance(element, AutomationFunction):
                for child in element.children:
                    sa = resolved.sa_by_id.get(child)
                    if sa is not None:
                        linked_sas.append(sa)
        for sa in linked_sas:
            if sa.execution_time_ms is None:
                continue
            for prop in bounds:
                if sa.execution_time_ms > float(prop.value):
                    diags.append(Diagnostic.warning(
                        W_NFR_TIME, f"sa '{sa.name}'",
                        f"execution time {sa.execution_time_ms:g} ms exceeds "
                        f"'{req.name}' bound {prop.key}={prop.value} ms"))
    return diags


def validate_model(model: Model,
                   allow_widening: bool = False) -> tuple[ResolvedModel, ValidationReport]:
    """Run the whole validation pipeline and aggregate one report."""
    resolved, diags = resolve_model(model)
    for block in model.blocks:
        diags.extend(validate_block_restrictions(block))
    for block in model.blocks:
        if isinstance(block, PersistentBlock):
            diags.extend(_constraint_binding_diags(resolved, block))
    diags.extend(_part_cycle_diags(resolved))
    diags.extend(validate_connections(resolved, allow_widening))
    diags.extend(validate_system(resolved))
    diags.extend(check_timing_budget(resolved))
    return resolved, ValidationReport(diags)
