"""Publisher/subscriber exchange plan for cross-node data connections.

Every data connection whose two software applications are allocated to
different nodes yields one exchange variable: published by the node of the
out-port side, read by the node of the in-port side.  Same-node connections
are wired directly inside the node program and produce no entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import names
from .diagnostics import Diagnostic, E_MISSING_ADDRESS
from .model import ConnectionKind, DataType, Node, ResolvedModel


class CommError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class CommEntry:
    variable: str
    data_type: DataType
    publisher_node: str  # node id
    publisher_ams: str | None
    subscriber_node: str
    subscriber_ams: str | None
    source_sa: str  # sa id
    source_port: str
    target_sa: str
    target_port: str
    connection_id: str


@dataclass
class CommConfig:
    entries: list[CommEntry] = field(default_factory=list)

    def published_by(self, node_id: str) -> list[CommEntry]:
        return [e for e in self.entries if e.publisher_node == node_id]

    def subscribed_by(self, node_id: str) -> list[CommEntry]:
        return [e for e in self.entries if e.subscriber_node == node_id]


def _node_address_diag(node: Node, where: str) -> Diagnostic | None:
    if node.ams_net_id is None and not node.bus_address:
        return Diagnostic.error(
            E_MISSING_ADDRESS, where,
            f"node '{node.name}' has neither amsNetId nor bus address")
    return None


def derive_pubsub(resolved: ResolvedModel) -> CommConfig:
    """Build the exchange plan; raises CommError when a participating node
    cannot be addressed."""
    entries: list[CommEntry] = []
    problems: list[Diagnostic] = []
    taken: set[str] = set()
    for conn in resolved.model.connections:
        if conn.kind is not ConnectionKind.DATA:
            continue
        src_sa = resolved.sa_of_connection_end(conn.source)
        tgt_sa = resolved.sa_of_connection_end(conn.target)
        if src_sa is None or tgt_sa is None:
            continue
        src_node = resolved.node_of_sa.get(src_sa.id)
        tgt_node = resolved.node_of_sa.get(tgt_sa.id)
        if src_node is None or tgt_node is None or src_node.id == tgt_node.id:
            continue
        where = f"connection '{conn.id}'"
        for node in (src_node, tgt_node):
            diag = _node_address_diag(node, where)
            if diag is not None:
                problems.append(diag)
        src_port = resolved.port_of(conn.source)
        tgt_port = resolved.port_of(conn.target)
        if src_port is None or tgt_port is None:
            continue
        base = names.sanitize(f"{src_sa.name}_{src_port.name}")
        variable = names.unique_name(base, taken)
        entries.append(CommEntry(
            variable=variable,
            data_type=src_port.data_type,
            publisher_node=src_node.id,
            publisher_ams=src_node.ams_net_id,
            subscriber_node=tgt_node.id,
            subscriber_ams=tgt_node.ams_net_id,
            source_sa=src_sa.id,
            source_port=src_port.name,
            target_sa=tgt_sa.id,
            target_port=tgt_port.name,
            connection_id=conn.id,
        ))
    if problems:
        raise CommError(problems)
    return CommConfig(entries)


def emit_comm_config(cfg: CommConfig) -> str:
    """Render the plan as canonical JSON sorted by (publisher, variable)."""
    items = []
    for entry in sorted(cfg.entries,
                        key=lambda e: (e.publisher_node, e.variable.lower())):
        publisher: dict = {"node": entry.publisher_node}
        if entry.publisher_ams is not None:
            publisher["amsNetId"] = entry.publisher_ams
        subscriber: dict = {"node": entry.subscriber_node}
        if entry.subscriber_ams is not None:
            subscriber["amsNetId"] = entry.subscriber_ams
        items.append({
            "variable": entry.variable,
            "type": entry.data_type.value,
            "publisher": publisher,
            "subscriber": subscriber,
            "sourcePort": entry.source_port,
            "targetPort": entry.target_port,
        })
    return json.dumps({"entries": items}, indent=2, ensure_ascii=False) + "\n"
