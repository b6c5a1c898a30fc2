"""Textual `.maspm` model format: strict JSON parse and canonical serialize.

The document is a UTF-8 JSON object with a `formatVersion` plus seven section
arrays (requirements, relations, functions, hardware, allocations,
connections, blocks).  `parse(serialize(m)) == m` holds structurally and
serialization is byte-deterministic; see docs/format.md for the schema.
"""

from __future__ import annotations

import json
import math
import re
from typing import Any

from . import names
from .diagnostics import (
    Diagnostic,
    E_IDENT,
    E_SYNTAX,
    E_UNKNOWN_KEY,
    E_VALUE,
    E_VERSION,
    W_UNKNOWN_KEY,
)
from .model import (
    Allocation,
    AutomationFunction,
    Block,
    BlockPort,
    Connection,
    ConnectionEnd,
    ConnectionKind,
    ConstraintParameter,
    ConstraintProperty,
    CURRENT_FORMAT_VERSION,
    DataType,
    DirectedPort,
    Model,
    Node,
    OrderedFlow,
    PartProperty,
    PersistentBlock,
    PortDirection,
    Requirement,
    RequirementKind,
    RequirementRelation,
    RelationKind,
    ReqProperty,
    Scalar,
    Sensor,
    SoftwareApplication,
    TransientBlock,
    ValueProperty,
    Actuator,
)

FILE_EXTENSION = ".maspm"
SUPPORTED_MAJOR = 1

_SEMVER_RE = re.compile(r"(\d+)\.(\d+)\.(\d+)\Z")
_AMS_NET_ID_RE = re.compile(r"\d{1,3}(\.\d{1,3}){5}\Z")


class _Ctx:
    def __init__(self, strict: bool):
        self.strict = strict
        self.diags: list[Diagnostic] = []

    def error(self, code: str, path: str, message: str) -> None:
        self.diags.append(Diagnostic.error(code, path, message))

    def warning(self, code: str, path: str, message: str) -> None:
        self.diags.append(Diagnostic.warning(code, path, message))

    def unknown_keys(self, obj: dict, allowed: set[str], path: str) -> None:
        for key in obj:
            if key in allowed:
                continue
            if self.strict:
                self.error(E_UNKNOWN_KEY, f"{path}.{key}", f"unknown key '{key}'")
            else:
                self.warning(W_UNKNOWN_KEY, f"{path}.{key}", f"unknown key '{key}' ignored")

    def str_field(self, obj: dict, key: str, path: str, required: bool = True,
                  default: str = "") -> str:
        if key not in obj:
            if required:
                self.error(E_SYNTAX, path, f"missing key '{key}'")
            return default
        value = obj[key]
        if not isinstance(value, str):
            self.error(E_VALUE, f"{path}.{key}", f"'{key}' must be a string")
            return default
        return value

    def number_field(self, obj: dict, key: str, path: str, required: bool = True,
                     default: float = 0.0) -> float:
        if key not in obj:
            if required:
                self.error(E_SYNTAX, path, f"missing key '{key}'")
            return default
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(E_VALUE, f"{path}.{key}", f"'{key}' must be a number")
            return default
        if isinstance(value, float) and not math.isfinite(value):
            self.error(E_VALUE, f"{path}.{key}", f"'{key}' must be finite")
            return default
        return value

    def int_field(self, obj: dict, key: str, path: str, required: bool = True,
                  default: int = 0) -> int:
        if key not in obj:
            if required:
                self.error(E_SYNTAX, path, f"missing key '{key}'")
            return default
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, int):
            self.error(E_VALUE, f"{path}.{key}", f"'{key}' must be an integer")
            return default
        return value

    def list_field(self, obj: dict, key: str, path: str) -> list:
        value = obj.get(key, [])
        if not isinstance(value, list):
            self.error(E_VALUE, f"{path}.{key}", f"'{key}' must be an array")
            return []
        return value

    def obj_item(self, value: Any, path: str) -> dict | None:
        if not isinstance(value, dict):
            self.error(E_SYNTAX, path, "expected an object")
            return None
        return value

    def identifier(self, name: str, path: str) -> None:
        reason = names.identifier_error(name)
        if reason is not None:
            self.error(E_IDENT, path, f"'{name}': {reason}")

    def unique(self, name: str, seen: set[str], path: str) -> None:
        if name.lower() in seen:
            self.error(E_IDENT, path, f"'{name}' duplicates a name in this scope")
        seen.add(name.lower())

    def enum_field(self, obj: dict, key: str, enum_cls, path: str, default):
        raw = self.str_field(obj, key, path, required=default is None,
                             default="" if default is None else default.value)
        try:
            return enum_cls(raw)
        except ValueError:
            allowed = ", ".join(e.value for e in enum_cls)
            self.error(E_VALUE, f"{path}.{key}", f"'{raw}' not one of: {allowed}")
            return default if default is not None else list(enum_cls)[0]


def _parse_scalar(ctx: _Ctx, obj: dict, key: str, path: str) -> Scalar | None:
    if key not in obj:
        return None
    value = obj[key]
    if isinstance(value, float) and not math.isfinite(value):
        ctx.error(E_VALUE, f"{path}.{key}", f"'{key}' must be finite")
        return None
    if isinstance(value, (bool, int, float, str)):
        return value
    ctx.error(E_VALUE, f"{path}.{key}", f"'{key}' must be a scalar")
    return None


def _scalar_matches(value: Scalar, data_type: DataType) -> bool:
    if data_type is DataType.BOOL:
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    if data_type in (DataType.INT, DataType.DINT):
        return isinstance(value, int)
    return isinstance(value, (int, float))


def _parse_directed_ports(ctx: _Ctx, raw: list, path: str) -> list[DirectedPort]:
    ports: list[DirectedPort] = []
    seen: set[str] = set()
    for i, item in enumerate(raw):
        ipath = f"{path}[{i}]"
        obj = ctx.obj_item(item, ipath)
        if obj is None:
            continue
        ctx.unknown_keys(obj, {"name", "direction", "dataType"}, ipath)
        name = ctx.str_field(obj, "name", ipath)
        ctx.identifier(name, f"{ipath}.name")
        ctx.unique(name, seen, f"{ipath}.name")
        direction = ctx.enum_field(obj, "direction", PortDirection, ipath, None)
        data_type = ctx.enum_field(obj, "dataType", DataType, ipath, None)
        ports.append(DirectedPort(name, direction, data_type))
    return ports


def _parse_block_ports(ctx: _Ctx, raw: list, path: str, seen: set[str]) -> list[BlockPort]:
    ports: list[BlockPort] = []
    for i, item in enumerate(raw):
        ipath = f"{path}[{i}]"
        obj = ctx.obj_item(item, ipath)
        if obj is None:
            continue
        ctx.unknown_keys(obj, {"name", "dataType"}, ipath)
        name = ctx.str_field(obj, "name", ipath)
        ctx.identifier(name, f"{ipath}.name")
        ctx.unique(name, seen, f"{ipath}.name")
        data_type = ctx.enum_field(obj, "dataType", DataType, ipath, None)
        ports.append(BlockPort(name, data_type))
    return ports


def _parse_requirements(ctx: _Ctx, raw: list) -> list[Requirement]:
    out = []
    for i, item in enumerate(raw):
        path = f"requirements[{i}]"
        obj = ctx.obj_item(item, path)
        if obj is None:
            continue
        ctx.unknown_keys(obj, {"id", "name", "text", "kind", "properties"}, path)
        rid = ctx.str_field(obj, "id", path)
        name = ctx.str_field(obj, "name", path)
        if not name:
            ctx.error(E_VALUE, f"{path}.name", "requirement name must be non-empty")
        text = ctx.str_field(obj, "text", path, required=False)
        kind = ctx.enum_field(obj, "kind", RequirementKind, path, None)
        props: list[ReqProperty] = []
        for j, pitem in enumerate(ctx.list_field(obj, "properties", path)):
            ppath = f"{path}.properties[{j}]"
            pobj = ctx.obj_item(pitem, ppath)
            if pobj is None:
                continue
            ctx.unknown_keys(pobj, {"key", "value", "unit"}, ppath)
            key = ctx.str_field(pobj, "key", ppath)
            value = _parse_scalar(ctx, pobj, "value", ppath)
            unit = ctx.str_field(pobj, "unit", ppath, required=False)
            props.append(ReqProperty(key, value if value is not None else 0, unit))
        if props and kind is RequirementKind.FUNCTIONAL:
            ctx.error(E_VALUE, f"{path}.properties",
                      "functional requirements carry no properties")
        out.append(Requirement(rid, name, text, kind, props))
    return out


def _parse_relations(ctx: _Ctx, raw: list) -> list[RequirementRelation]:
    out = []
    for i, item in enumerate(raw):
        path = f"relations[{i}]"
        obj = ctx.obj_item(item, path)
        if obj is None:
            continue
        ctx.unknown_keys(obj, {"kind", "source", "target"}, path)
        kind = ctx.enum_field(obj, "kind", RelationKind, path, None)
        out.append(RequirementRelation(kind, ctx.str_field(obj, "source", path),
                                       ctx.str_field(obj, "target", path)))
    return out


def _parse_functions(ctx: _Ctx, raw: list) -> tuple[list[AutomationFunction], list[SoftwareApplication]]:
    afs: list[AutomationFunction] = []
    sas: list[SoftwareApplication] = []
    for i, item in enumerate(raw):
        path = f"functions[{i}]"
        obj = ctx.obj_item(item, path)
        if obj is None:
            continue
        kind = ctx.str_field(obj, "kind", path)
        if kind == "af":
            ctx.unknown_keys(obj, {"kind", "id", "name", "connections", "children"}, path)
            connections = ctx.list_field(obj, "connections", path)
            children = ctx.list_field(obj, "children", path)
            if not all(isinstance(c, str) for c in connections + children):
                ctx.error(E_VALUE, path, "connections/children must be id strings")
                connections = [c for c in connections if isinstance(c, str)]
                children = [c for c in children if isinstance(c, str)]
            afs.append(AutomationFunction(ctx.str_field(obj, "id", path),
                                          ctx.str_field(obj, "name", path),
                                          list(connections), list(children)))
        elif kind == "sa":
            ctx.unknown_keys(obj, {"kind", "id", "name", "ports", "behavior",
                                   "executionTime"}, path)
            exec_time = None
            if "executionTime" in obj:
                exec_time = ctx.number_field(obj, "executionTime", path)
                if exec_time is not None and exec_time < 0:
                    ctx.error(E_VALUE, f"{path}.executionTime",
                              "executionTime must be >= 0")
            sas.append(SoftwareApplication(
                ctx.str_field(obj, "id", path),
                ctx.str_field(obj, "name", path),
                _parse_directed_ports(ctx, ctx.list_field(obj, "ports", path),
                                      f"{path}.ports"),
                ctx.str_field(obj, "behavior", path),
                exec_time,
            ))
        else:
            ctx.error(E_VALUE, f"{path}.kind", f"'{kind}' must be 'af' or 'sa'")
    return afs, sas


def _parse_hardware(ctx: _Ctx, raw: list) -> tuple[list[Node], list[Sensor], list[Actuator]]:
    nodes: list[Node] = []
    sensors: list[Sensor] = []
    actuators: list[Actuator] = []
    for i, item in enumerate(raw):
        path = f"hardware[{i}]"
        obj = ctx.obj_item(item, path)
        if obj is None:
            continue
        kind = ctx.str_field(obj, "kind", path)
        if kind == "node":
            ctx.unknown_keys(obj, {"kind", "id", "name", "vendorStereotype", "busType",
                                   "busAddress", "amsNetId", "cycleTime", "memory",
                                   "ports"}, path)
            ams = obj.get("amsNetId")
            if ams is not None:
                if not isinstance(ams, str) or not _AMS_NET_ID_RE.match(ams) or any(
                    int(f) > 255 for f in ams.split(".")
                ):
                    ctx.error(E_VALUE, f"{path}.amsNetId",
                              "amsNetId must be six dot-separated fields 0-255")
                    ams = None
            cycle = ctx.number_field(obj, "cycleTime", path)
            if cycle <= 0:
                ctx.error(E_VALUE, f"{path}.cycleTime", "cycleTime must be > 0")
            vendor = obj.get("vendorStereotype")
            if vendor is not None and not isinstance(vendor, str):
                ctx.error(E_VALUE, f"{path}.vendorStereotype", "must be a string")
                vendor = None
            nodes.append(Node(
                ctx.str_field(obj, "id", path),
                ctx.str_field(obj, "name", path),
                ctx.str_field(obj, "busType", path, required=False),
                ctx.str_field(obj, "busAddress", path, required=False),
                vendor,
                ams,
                cycle,
                ctx.number_field(obj, "memory", path, required=False),
                _parse_directed_ports(ctx, ctx.list_field(obj, "ports", path),
                                      f"{path}.ports"),
            ))
        elif kind in ("sensor", "actuator"):
            ctx.unknown_keys(obj, {"kind", "id", "name", "deviceType", "busType",
                                   "busAddress", "ports"}, path)
            cls = Sensor if kind == "sensor" else Actuator
            device = cls(
                ctx.str_field(obj, "id", path),
                ctx.str_field(obj, "name", path),
                ctx.str_field(obj, "deviceType", path, required=False),
                ctx.str_field(obj, "busType", path, required=False),
                ctx.str_field(obj, "busAddress", path, required=False),
                _parse_directed_ports(ctx, ctx.list_field(obj, "ports", path),
                                      f"{path}.ports"),
            )
            (sensors if kind == "sensor" else actuators).append(device)
        else:
            ctx.error(E_VALUE, f"{path}.kind",
                      f"'{kind}' must be 'node', 'sensor' or 'actuator'")
    return nodes, sensors, actuators


def _parse_connection_end(ctx: _Ctx, obj: dict, key: str, path: str) -> ConnectionEnd:
    epath = f"{path}.{key}"
    if key not in obj:
        ctx.error(E_SYNTAX, path, f"missing key '{key}'")
        return ConnectionEnd("", None)
    eobj = ctx.obj_item(obj[key], epath)
    if eobj is None:
        return ConnectionEnd("", None)
    ctx.unknown_keys(eobj, {"element", "port"}, epath)
    port = eobj.get("port")
    if port is not None and not isinstance(port, str):
        ctx.error(E_VALUE, f"{epath}.port", "port must be a string")
        port = None
    return ConnectionEnd(ctx.str_field(eobj, "element", epath), port)


def _parse_connections(ctx: _Ctx, raw: list) -> list[Connection]:
    out = []
    for i, item in enumerate(raw):
        path = f"connections[{i}]"
        obj = ctx.obj_item(item, path)
        if obj is None:
            continue
        ctx.unknown_keys(obj, {"id", "kind", "source", "target"}, path)
        out.append(Connection(
            ctx.str_field(obj, "id", path),
            ctx.enum_field(obj, "kind", ConnectionKind, path, None),
            _parse_connection_end(ctx, obj, "source", path),
            _parse_connection_end(ctx, obj, "target", path),
        ))
    return out


def _parse_flow(ctx: _Ctx, obj: dict, path: str) -> OrderedFlow:
    ctx.unknown_keys(obj, {"sourceInstance", "sourceFeature", "targetInstance",
                           "targetFeature", "orderNumber"}, path)
    return OrderedFlow(
        ctx.str_field(obj, "sourceInstance", path),
        ctx.str_field(obj, "sourceFeature", path),
        ctx.str_field(obj, "targetInstance", path),
        ctx.str_field(obj, "targetFeature", path),
        ctx.int_field(obj, "orderNumber", path, required=False),
    )


def _parse_blocks(ctx: _Ctx, raw: list) -> list[Block]:
    out: list[Block] = []
    for i, item in enumerate(raw):
        path = f"blocks[{i}]"
        obj = ctx.obj_item(item, path)
        if obj is None:
            continue
        kind = ctx.str_field(obj, "kind", path)
        name = ctx.str_field(obj, "name", path)
        ctx.identifier(name, f"{path}.name")
        if kind == "persistent":
            ctx.unknown_keys(obj, {"kind", "id", "name", "parts", "values",
                                   "constraints", "inPorts", "outPorts", "flows"}, path)
            members: set[str] = set()
            parts = []
            for j, pitem in enumerate(ctx.list_field(obj, "parts", path)):
                ppath = f"{path}.parts[{j}]"
                pobj = ctx.obj_item(pitem, ppath)
                if pobj is None:
                    continue
                ctx.unknown_keys(pobj, {"name", "type", "orderNumber"}, ppath)
                pname = ctx.str_field(pobj, "name", ppath)
                ctx.identifier(pname, f"{ppath}.name")
                ctx.unique(pname, members, f"{ppath}.name")
                parts.append(PartProperty(pname, ctx.str_field(pobj, "type", ppath),
                                          ctx.int_field(pobj, "orderNumber", ppath,
                                                        required=False)))
            values = []
            for j, vitem in enumerate(ctx.list_field(obj, "values", path)):
                vpath = f"{path}.values[{j}]"
                vobj = ctx.obj_item(vitem, vpath)
                if vobj is None:
                    continue
                ctx.unknown_keys(vobj, {"name", "dataType", "initialValue"}, vpath)
                vname = ctx.str_field(vobj, "name", vpath)
                ctx.identifier(vname, f"{vpath}.name")
                ctx.unique(vname, members, f"{vpath}.name")
                dtype = ctx.enum_field(vobj, "dataType", DataType, vpath, None)
                init = _parse_scalar(ctx, vobj, "initialValue", vpath)
                if init is not None and not _scalar_matches(init, dtype):
                    ctx.error(E_VALUE, f"{vpath}.initialValue",
                              f"initialValue does not match {dtype.value}")
                    init = None
                values.append(ValueProperty(vname, dtype, init))
            constraints = []
            for j, citem in enumerate(ctx.list_field(obj, "constraints", path)):
                cpath = f"{path}.constraints[{j}]"
                cobj = ctx.obj_item(citem, cpath)
                if cobj is None:
                    continue
                ctx.unknown_keys(cobj, {"name", "type", "orderNumber"}, cpath)
                cname = ctx.str_field(cobj, "name", cpath)
                ctx.identifier(cname, f"{cpath}.name")
                ctx.unique(cname, members, f"{cpath}.name")
                constraints.append(ConstraintProperty(
                    cname, ctx.str_field(cobj, "type", cpath),
                    ctx.int_field(cobj, "orderNumber", cpath, required=False, default=1)))
            in_ports = _parse_block_ports(ctx, ctx.list_field(obj, "inPorts", path),
                                          f"{path}.inPorts", members)
            out_ports = _parse_block_ports(ctx, ctx.list_field(obj, "outPorts", path),
                                           f"{path}.outPorts", members)
            flows = []
            for j, fitem in enumerate(ctx.list_field(obj, "flows", path)):
                fpath = f"{path}.flows[{j}]"
                fobj = ctx.obj_item(fitem, fpath)
                if fobj is None:
                    continue
                flows.append(_parse_flow(ctx, fobj, fpath))
            out.append(PersistentBlock(ctx.str_field(obj, "id", path), name, parts,
                                       values, constraints, in_ports, out_ports, flows))
        elif kind == "transient":
            ctx.unknown_keys(obj, {"kind", "id", "name", "params", "body"}, path)
            params = []
            seen: set[str] = set()
            for j, pitem in enumerate(ctx.list_field(obj, "params", path)):
                ppath = f"{path}.params[{j}]"
                pobj = ctx.obj_item(pitem, ppath)
                if pobj is None:
                    continue
                ctx.unknown_keys(pobj, {"name", "dataType", "direction"}, ppath)
                pname = ctx.str_field(pobj, "name", ppath)
                ctx.identifier(pname, f"{ppath}.name")
                ctx.unique(pname, seen, f"{ppath}.name")
                params.append(ConstraintParameter(
                    pname, ctx.enum_field(pobj, "dataType", DataType, ppath, None),
                    ctx.enum_field(pobj, "direction", PortDirection, ppath, None)))
            body = ctx.list_field(obj, "body", path)
            if not all(isinstance(s, str) for s in body):
                ctx.error(E_VALUE, f"{path}.body", "body must be an array of statements")
                body = [s for s in body if isinstance(s, str)]
            out.append(TransientBlock(ctx.str_field(obj, "id", path), name, params,
                                      list(body)))
        else:
            ctx.error(E_VALUE, f"{path}.kind",
                      f"'{kind}' must be 'persistent' or 'transient'")
    return out


SECTIONS = ("requirements", "relations", "functions", "hardware", "allocations",
            "connections", "blocks")


def parse_model(text: str, strict: bool = True) -> tuple[Model, list[Diagnostic]]:
    """Parse a `.maspm` document into an unresolved Model.

    In strict mode unknown keys are errors; in lenient mode they warn.
    """
    ctx = _Ctx(strict)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        ctx.error(E_SYNTAX, f"line {exc.lineno}, column {exc.colno}", exc.msg)
        return Model(), ctx.diags
    if not isinstance(doc, dict):
        ctx.error(E_SYNTAX, "", "document root must be an object")
        return Model(), ctx.diags

    ctx.unknown_keys(doc, {"formatVersion", *SECTIONS}, "$")

    version = doc.get("formatVersion")
    if not isinstance(version, str) or not _SEMVER_RE.match(version):
        ctx.error(E_VERSION, "formatVersion",
                  f"missing or malformed formatVersion (supported: {SUPPORTED_MAJOR}.x.y)")
        version = CURRENT_FORMAT_VERSION
    elif int(version.split(".")[0]) != SUPPORTED_MAJOR:
        ctx.error(E_VERSION, "formatVersion",
                  f"found {version}, supported major version is {SUPPORTED_MAJOR}")

    requirements = _parse_requirements(ctx, ctx.list_field(doc, "requirements", "$"))
    relations = _parse_relations(ctx, ctx.list_field(doc, "relations", "$"))
    afs, sas = _parse_functions(ctx, ctx.list_field(doc, "functions", "$"))
    nodes, sensors, actuators = _parse_hardware(ctx, ctx.list_field(doc, "hardware", "$"))

    allocations = []
    for i, item in enumerate(ctx.list_field(doc, "allocations", "$")):
        path = f"allocations[{i}]"
        obj = ctx.obj_item(item, path)
        if obj is None:
            continue
        ctx.unknown_keys(obj, {"sa", "node"}, path)
        allocations.append(Allocation(ctx.str_field(obj, "sa", path),
                                      ctx.str_field(obj, "node", path)))

    connections = _parse_connections(ctx, ctx.list_field(doc, "connections", "$"))
    blocks = _parse_blocks(ctx, ctx.list_field(doc, "blocks", "$"))

    model = Model(version, requirements, relations, afs, sas, nodes, sensors,
                  actuators, allocations, connections, blocks)
    return model, ctx.diags


def _emit_directed_ports(ports: list[DirectedPort]) -> list[dict]:
    return [
        {"name": p.name, "direction": p.direction.value, "dataType": p.data_type.value}
        for p in ports
    ]


def _emit_end(end: ConnectionEnd) -> dict:
    out: dict[str, Any] = {"element": end.element}
    if end.port is not None:
        out["port"] = end.port
    return out


def _emit_block(block: Block) -> dict:
    if isinstance(block, TransientBlock):
        return {
            "kind": "transient",
            "id": block.id,
            "name": block.name,
            "params": [
                {"name": p.name, "dataType": p.data_type.value,
                 "direction": p.direction.value}
                for p in block.params
            ],
            "body": list(block.body),
        }
    values = []
    for v in block.values:
        item: dict[str, Any] = {"name": v.name, "dataType": v.data_type.value}
        if v.initial_value is not None:
            item["initialValue"] = v.initial_value
        values.append(item)
    return {
        "kind": "persistent",
        "id": block.id,
        "name": block.name,
        "parts": [
            {"name": p.name, "type": p.type, "orderNumber": p.order_number}
            for p in block.parts
        ],
        "values": values,
        "constraints": [
            {"name": c.name, "type": c.type, "orderNumber": c.order_number}
            for c in block.constraints
        ],
        "inPorts": [{"name": p.name, "dataType": p.data_type.value}
                    for p in block.in_ports],
        "outPorts": [{"name": p.name, "dataType": p.data_type.value}
                     for p in block.out_ports],
        "flows": [
            {"sourceInstance": f.source_instance, "sourceFeature": f.source_feature,
             "targetInstance": f.target_instance, "targetFeature": f.target_feature,
             "orderNumber": f.order_number}
            for f in block.flows
        ],
    }


def serialize_model(model: Model) -> str:
    """Render a Model into canonical `.maspm` text (2-space indent, LF)."""
    functions: list[dict] = []
    for af in model.afs:
        functions.append({
            "kind": "af", "id": af.id, "name": af.name,
            "connections": list(af.connections), "children": list(af.children),
        })
    for sa in model.sas:
        item: dict[str, Any] = {
            "kind": "sa", "id": sa.id, "name": sa.name,
            "ports": _emit_directed_ports(sa.ports), "behavior": sa.behavior,
        }
        if sa.execution_time_ms is not None:
            item["executionTime"] = sa.execution_time_ms
        functions.append(item)

    hardware: list[dict] = []
    for node in model.nodes:
        item = {"kind": "node", "id": node.id, "name": node.name}
        if node.vendor_stereotype is not None:
            item["vendorStereotype"] = node.vendor_stereotype
        item["busType"] = node.bus_type
        item["busAddress"] = node.bus_address
        if node.ams_net_id is not None:
            item["amsNetId"] = node.ams_net_id
        item["cycleTime"] = node.cycle_time_ms
        item["memory"] = node.memory_kb
        item["ports"] = _emit_directed_ports(node.ports)
        hardware.append(item)
    for device in [*model.sensors, *model.actuators]:
        hardware.append({
            "kind": "sensor" if isinstance(device, Sensor) else "actuator",
            "id": device.id, "name": device.name, "deviceType": device.device_type,
            "busType": device.bus_type, "busAddress": device.bus_address,
            "ports": _emit_directed_ports(device.ports),
        })

    requirements = []
    for req in model.requirements:
        item = {"id": req.id, "name": req.name, "text": req.text,
                "kind": req.kind.value}
        if req.properties:
            item["properties"] = [
                {"key": p.key, "value": p.value, "unit": p.unit}
                for p in req.properties
            ]
        requirements.append(item)

    doc = {
        "formatVersion": model.format_version,
        "requirements": requirements,
        "relations": [
            {"kind": r.kind.value, "source": r.source, "target": r.target}
            for r in model.relations
        ],
        "functions": functions,
        "hardware": hardware,
        "allocations": [{"sa": a.sa, "node": a.node} for a in model.allocations],
        "connections": [
            {"id": c.id, "kind": c.kind.value, "source": _emit_end(c.source),
             "target": _emit_end(c.target)}
            for c in model.connections
        ],
        "blocks": [_emit_block(b) for b in model.blocks],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
