"""SysML-AT metamodel: plain-data model types, reference resolution and
data-type compatibility.

All types are built once (by the parser or by hand) and treated as immutable
afterwards; resolution never mutates the model, it only builds lookup maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .diagnostics import (
    Diagnostic,
    E_DUP_ID,
    E_DUP_NAME,
    E_RELATION_KIND,
    E_UNRESOLVED_REF,
)
from .names import SELF_MARKER

CURRENT_FORMAT_VERSION = "1.0.0"

Scalar = bool | int | float | str


class DataType(str, Enum):
    BOOL = "BOOL"
    INT = "INT"
    DINT = "DINT"
    REAL = "REAL"
    LREAL = "LREAL"


# Lossless widening pairs; narrowing is never allowed.
WIDENING: frozenset[tuple[DataType, DataType]] = frozenset(
    {(DataType.INT, DataType.DINT), (DataType.REAL, DataType.LREAL)}
)


def type_compatible(a: DataType, b: DataType, allow_widening: bool = False) -> bool:
    """True iff a value of type `a` may feed a slot of type `b`."""
    if a == b:
        return True
    return allow_widening and (a, b) in WIDENING


class PortDirection(str, Enum):
    IN = "in"
    OUT = "out"


class RequirementKind(str, Enum):
    FUNCTIONAL = "functional"
    NON_FUNCTIONAL = "nonFunctional"


class RelationKind(str, Enum):
    REFINE = "Refine"
    VALIDITY = "Validity"


class ConnectionKind(str, Enum):
    DATA = "data"
    CONTROL = "control"
    LOGICAL = "logical"


@dataclass
class ReqProperty:
    """Type-value pair attached to a non-functional requirement."""

    key: str
    value: Scalar
    unit: str = ""


@dataclass
class Requirement:
    id: str
    name: str
    text: str = ""
    kind: RequirementKind = RequirementKind.FUNCTIONAL
    properties: list[ReqProperty] = field(default_factory=list)


@dataclass
class RequirementRelation:
    kind: RelationKind
    source: str
    target: str


@dataclass
class DirectedPort:
    """Interface port of an SA or a hardware element."""

    name: str
    direction: PortDirection
    data_type: DataType


@dataclass
class AutomationFunction:
    id: str
    name: str
    connections: list[str] = field(default_factory=list)
    children: list[str] = field(default_factory=list)


@dataclass
class SoftwareApplication:
    id: str
    name: str
    ports: list[DirectedPort] = field(default_factory=list)
    behavior: str = ""
    execution_time_ms: float | None = None


@dataclass
class Node:
    id: str
    name: str
    bus_type: str = ""
    bus_address: str = ""
    vendor_stereotype: str | None = None
    ams_net_id: str | None = None
    cycle_time_ms: float = 10.0
    memory_kb: float = 0.0
    ports: list[DirectedPort] = field(default_factory=list)


@dataclass
class Sensor:
    id: str
    name: str
    device_type: str = ""
    bus_type: str = ""
    bus_address: str = ""
    ports: list[DirectedPort] = field(default_factory=list)


@dataclass
class Actuator:
    id: str
    name: str
    device_type: str = ""
    bus_type: str = ""
    bus_address: str = ""
    ports: list[DirectedPort] = field(default_factory=list)


@dataclass
class Allocation:
    sa: str
    node: str


@dataclass
class ConnectionEnd:
    element: str
    port: str | None = None


@dataclass
class Connection:
    id: str
    kind: ConnectionKind
    source: ConnectionEnd
    target: ConnectionEnd


@dataclass
class BlockPort:
    """InPort or OutPort of a PersistentBlock (direction given by the list)."""

    name: str
    data_type: DataType


@dataclass
class PartProperty:
    name: str
    type: str
    order_number: int = 0  # 0 = declared but never invoked


@dataclass
class ValueProperty:
    name: str
    data_type: DataType
    initial_value: Scalar | None = None


@dataclass
class ConstraintProperty:
    name: str
    type: str
    order_number: int = 1


@dataclass
class OrderedFlow:
    source_instance: str  # member name or "self"
    source_feature: str
    target_instance: str
    target_feature: str
    order_number: int = 0


@dataclass
class PersistentBlock:
    id: str
    name: str
    parts: list[PartProperty] = field(default_factory=list)
    values: list[ValueProperty] = field(default_factory=list)
    constraints: list[ConstraintProperty] = field(default_factory=list)
    in_ports: list[BlockPort] = field(default_factory=list)
    out_ports: list[BlockPort] = field(default_factory=list)
    flows: list[OrderedFlow] = field(default_factory=list)

    def member_names(self) -> list[str]:
        return (
            [p.name for p in self.parts]
            + [v.name for v in self.values]
            + [c.name for c in self.constraints]
            + [p.name for p in self.in_ports]
            + [p.name for p in self.out_ports]
        )

    def flow_constraint_owner(self, flow: "OrderedFlow") -> str | None:
        """Name of the ConstraintProperty a flow is attached to, if any."""
        cp_names = {cp.name.lower() for cp in self.constraints}
        for instance in (flow.source_instance, flow.target_instance):
            if instance.lower() in cp_names:
                return instance
        return None


@dataclass
class ConstraintParameter:
    name: str
    data_type: DataType
    direction: PortDirection = PortDirection.IN


@dataclass
class TransientBlock:
    id: str
    name: str
    params: list[ConstraintParameter] = field(default_factory=list)
    body: list[str] = field(default_factory=list)

    def in_params(self) -> list[ConstraintParameter]:
        return [p for p in self.params if p.direction is PortDirection.IN]

    def out_params(self) -> list[ConstraintParameter]:
        return [p for p in self.params if p.direction is PortDirection.OUT]


Block = PersistentBlock | TransientBlock
Element = AutomationFunction | SoftwareApplication | Node | Sensor | Actuator


@dataclass
class Model:
    """A full SysML-AT project, unresolved (references are id strings)."""

    format_version: str = CURRENT_FORMAT_VERSION
    requirements: list[Requirement] = field(default_factory=list)
    relations: list[RequirementRelation] = field(default_factory=list)
    afs: list[AutomationFunction] = field(default_factory=list)
    sas: list[SoftwareApplication] = field(default_factory=list)
    nodes: list[Node] = field(default_factory=list)
    sensors: list[Sensor] = field(default_factory=list)
    actuators: list[Actuator] = field(default_factory=list)
    allocations: list[Allocation] = field(default_factory=list)
    connections: list[Connection] = field(default_factory=list)
    blocks: list[Block] = field(default_factory=list)

    def elements(self) -> list[Element]:
        return [*self.afs, *self.sas, *self.nodes, *self.sensors, *self.actuators]


@dataclass(frozen=True)
class FeatureRef:
    """A resolved flow endpoint inside a PersistentBlock."""

    owner: str  # member name or "self"
    feature: str
    data_type: DataType
    readable: bool
    writable: bool


@dataclass
class ResolvedModel:
    """Model plus checked lookup maps; safe to share once built."""

    model: Model
    requirement_by_id: dict[str, Requirement]
    element_by_id: dict[str, Element]
    block_by_id: dict[str, Block]
    sa_by_id: dict[str, SoftwareApplication]
    node_by_id: dict[str, Node]
    node_of_sa: dict[str, Node]
    behavior_of_sa: dict[str, PersistentBlock]

    def sa_of_connection_end(self, end: ConnectionEnd) -> SoftwareApplication | None:
        element = self.element_by_id.get(end.element)
        return element if isinstance(element, SoftwareApplication) else None

    def port_of(self, end: ConnectionEnd) -> DirectedPort | None:
        element = self.element_by_id.get(end.element)
        if element is None or end.port is None:
            return None
        if isinstance(element, AutomationFunction):
            return None
        for port in element.ports:
            if port.name.lower() == end.port.lower():
                return port
        return None

    def resolve_feature(
        self, block: PersistentBlock, instance: str, feature: str
    ) -> FeatureRef | None:
        """Look up a flow endpoint; None when it does not resolve.

        Readability/writability encodes the dataflow role: a block's own
        InPort is readable inside the body, its OutPort writable (and
        readable back), a part's ports are seen from outside, and constraint
        parameters are bound by zero-order flows only.
        """
        want = feature.lower()
        if instance.lower() == SELF_MARKER:
            for port in block.in_ports:
                if port.name.lower() == want:
                    return FeatureRef("self", port.name, port.data_type, True, False)
            for port in block.out_ports:
                if port.name.lower() == want:
                    return FeatureRef("self", port.name, port.data_type, True, True)
            for value in block.values:
                if value.name.lower() == want:
                    return FeatureRef("self", value.name, value.data_type, True, True)
            return None
        iname = instance.lower()
        for value in block.values:
            if value.name.lower() == iname:
                return None  # values have no sub-features
        for part in block.parts:
            if part.name.lower() != iname:
                continue
            target = self.block_by_id.get(part.type)
            if not isinstance(target, PersistentBlock):
                return None
            for port in target.in_ports:
                if port.name.lower() == want:
                    return FeatureRef(part.name, port.name, port.data_type, False, True)
            for port in target.out_ports:
                if port.name.lower() == want:
                    return FeatureRef(part.name, port.name, port.data_type, True, False)
            return None
        for cp in block.constraints:
            if cp.name.lower() != iname:
                continue
            target = self.block_by_id.get(cp.type)
            if not isinstance(target, TransientBlock):
                return None
            for param in target.params:
                if param.name.lower() == want:
                    if param.direction is PortDirection.IN:
                        return FeatureRef(cp.name, param.name, param.data_type, False, True)
                    return FeatureRef(cp.name, param.name, param.data_type, True, False)
            return None
        return None


def resolve_model(model: Model) -> tuple[ResolvedModel, list[Diagnostic]]:
    """Check every id reference and build lookup maps.

    Returns the resolved model together with diagnostics; the maps are only
    trustworthy when no error diagnostics were produced.
    """
    diags: list[Diagnostic] = []

    requirement_by_id: dict[str, Requirement] = {}
    element_by_id: dict[str, Element] = {}
    block_by_id: dict[str, Block] = {}

    def register(table: dict, key: str, value, path: str) -> None:
        if key in requirement_by_id or key in element_by_id or key in block_by_id:
            diags.append(
                Diagnostic.error(E_DUP_ID, path, f"duplicate id '{key}'")
            )
            return
        table[key] = value

    for i, req in enumerate(model.requirements):
        register(requirement_by_id, req.id, req, f"requirements[{i}]")
    for i, af in enumerate(model.afs):
        register(element_by_id, af.id, af, f"afs[{i}]")
    for i, sa in enumerate(model.sas):
        register(element_by_id, sa.id, sa, f"sas[{i}]")
    for i, node in enumerate(model.nodes):
        register(element_by_id, node.id, node, f"nodes[{i}]")
    for i, sensor in enumerate(model.sensors):
        register(element_by_id, sensor.id, sensor, f"sensors[{i}]")
    for i, actuator in enumerate(model.actuators):
        register(element_by_id, actuator.id, actuator, f"actuators[{i}]")
    for i, block in enumerate(model.blocks):
        register(block_by_id, block.id, block, f"blocks[{i}]")

    def unresolved(path: str, ref: str) -> None:
        diags.append(
            Diagnostic.error(E_UNRESOLVED_REF, path, f"unknown reference '{ref}'")
        )

    for i, rel in enumerate(model.relations):
        path = f"relations[{i}]"
        if rel.source not in requirement_by_id:
            unresolved(f"{path}.source", rel.source)
        if rel.kind is RelationKind.REFINE:
            if rel.target not in requirement_by_id:
                if rel.target in element_by_id:
                    diags.append(
                        Diagnostic.error(
                            E_RELATION_KIND,
                            f"{path}.target",
                            "Refine must target a requirement",
                        )
                    )
                else:
                    unresolved(f"{path}.target", rel.target)
        else:
            if rel.target not in element_by_id:
                if rel.target in requirement_by_id:
                    diags.append(
                        Diagnostic.error(
                            E_RELATION_KIND,
                            f"{path}.target",
                            "Validity must target a modeled element",
                        )
                    )
                else:
                    unresolved(f"{path}.target", rel.target)

    sa_by_id = {sa.id: sa for sa in model.sas}
    node_by_id = {node.id: node for node in model.nodes}

    for i, af in enumerate(model.afs):
        for j, other in enumerate(af.connections):
            target = element_by_id.get(other)
            if not isinstance(target, AutomationFunction):
                unresolved(f"afs[{i}].connections[{j}]", other)
        for j, child in enumerate(af.children):
            target = element_by_id.get(child)
            if not isinstance(target, SoftwareApplication):
                unresolved(f"afs[{i}].children[{j}]", child)

    behavior_of_sa: dict[str, PersistentBlock] = {}
    for i, sa in enumerate(model.sas):
        seen: set[str] = set()
        for j, port in enumerate(sa.ports):
            if port.name.lower() in seen:
                diags.append(
                    Diagnostic.error(
                        E_DUP_NAME,
                        f"sas[{i}].ports[{j}]",
                        f"duplicate port name '{port.name}'",
                    )
                )
            seen.add(port.name.lower())
        if sa.behavior:
            block = block_by_id.get(sa.behavior)
            if isinstance(block, PersistentBlock):
                behavior_of_sa[sa.id] = block
            else:
                unresolved(f"sas[{i}].behavior", sa.behavior)
        else:
            unresolved(f"sas[{i}].behavior", "")

    node_of_sa: dict[str, Node] = {}
    for i, alloc in enumerate(model.allocations):
        if alloc.sa not in sa_by_id:
            unresolved(f"allocations[{i}].sa", alloc.sa)
        node = node_by_id.get(alloc.node)
        if node is None:
            unresolved(f"allocations[{i}].node", alloc.node)
        elif alloc.sa in sa_by_id and alloc.sa not in node_of_sa:
            # duplicates are reported by validate_system, first one wins here
            node_of_sa[alloc.sa] = node

    resolved = ResolvedModel(
        model=model,
        requirement_by_id=requirement_by_id,
        element_by_id=element_by_id,
        block_by_id=block_by_id,
        sa_by_id=sa_by_id,
        node_by_id=node_by_id,
        node_of_sa=node_of_sa,
        behavior_of_sa=behavior_of_sa,
    )

    for i, conn in enumerate(model.connections):
        for side, end in (("source", conn.source), ("target", conn.target)):
            path = f"connections[{i}].{side}"
            element = element_by_id.get(end.element)
            if element is None:
                unresolved(f"{path}.element", end.element)
                continue
            if end.port is not None and resolved.port_of(end) is None:
                unresolved(f"{path}.port", end.port)

    block_names: set[str] = set()
    for i, block in enumerate(model.blocks):
        if block.name.lower() in block_names:
            diags.append(
                Diagnostic.error(
                    E_DUP_NAME, f"blocks[{i}]",
                    f"duplicate block name '{block.name}'",
                )
            )
        block_names.add(block.name.lower())

    for i, block in enumerate(model.blocks):
        path = f"blocks[{i}]"
        if isinstance(block, TransientBlock):
            continue
        seen = set()
        for name in block.member_names():
            if name.lower() in seen:
                diags.append(
                    Diagnostic.error(
                        E_DUP_NAME, path, f"duplicate member name '{name}'"
                    )
                )
            seen.add(name.lower())
        for j, part in enumerate(block.parts):
            target = block_by_id.get(part.type)
            if not isinstance(target, PersistentBlock):
                unresolved(f"{path}.parts[{j}].type", part.type)
        for j, cp in enumerate(block.constraints):
            target = block_by_id.get(cp.type)
            if not isinstance(target, TransientBlock):
                unresolved(f"{path}.constraints[{j}].type", cp.type)
        for j, flow in enumerate(block.flows):
            if resolved.resolve_feature(block, flow.source_instance, flow.source_feature) is None:
                unresolved(
                    f"{path}.flows[{j}].source",
                    f"{flow.source_instance}.{flow.source_feature}",
                )
            if resolved.resolve_feature(block, flow.target_instance, flow.target_feature) is None:
                unresolved(
                    f"{path}.flows[{j}].target",
                    f"{flow.target_instance}.{flow.target_feature}",
                )

    return resolved, diags


def refine_cycle(model: Model) -> list[str] | None:
    """Return one cycle (as a list of requirement ids) in the Refine graph,
    or None when the graph is acyclic."""
    edges: dict[str, list[str]] = {}
    for rel in model.relations:
        if rel.kind is RelationKind.REFINE:
            edges.setdefault(rel.source, []).append(rel.target)

    WHITE, GREY, BLACK = 0, 1, 2
    color: dict[str, int] = {}
    stack: list[str] = []

    def visit(node: str) -> list[str] | None:
        color[node] = GREY
        stack.append(node)
        for nxt in edges.get(node, ()):
            state = color.get(nxt, WHITE)
            if state == GREY:
                return stack[stack.index(nxt):] + [nxt]
            if state == WHITE:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        color[node] = BLACK
        return None

    for start in list(edges):
        if color.get(start, WHITE) == WHITE:
            found = visit(start)
            if found:
                return found
    return None
