"""Reference resolution and model-level lookups."""

import maspc.model as M
from maspc.model import DataType, PortDirection, resolve_model, type_compatible


def errors(diags):
    return [d for d in diags if d.severity.value == "error"]


def codes(diags):
    return {d.code for d in errors(diags)}


def test_type_compatible_exact():
    for t in DataType:
        assert type_compatible(t, t)


def test_type_compatible_widening_gated():
    assert not type_compatible(DataType.INT, DataType.DINT)
    assert type_compatible(DataType.INT, DataType.DINT, allow_widening=True)
    assert type_compatible(DataType.REAL, DataType.LREAL, allow_widening=True)
    assert not type_compatible(DataType.DINT, DataType.INT, allow_widening=True)
    assert not type_compatible(DataType.INT, DataType.REAL, allow_widening=True)


def test_resolve_ppu_clean(ppu_model):
    resolved, diags = resolve_model(ppu_model)
    assert not errors(diags)
    assert resolved.node_of_sa["sa-mva"].id == "node-cx5020"
    assert resolved.behavior_of_sa["sa-vc"].id == "pb-vc"


def test_unresolved_allocation_node(ppu_model):
    ppu_model.allocations.append(M.Allocation("sa-mva", "CX9999"))
    _, diags = resolve_model(ppu_model)
    assert "E_UNRESOLVED_REF" in codes(diags)


def test_unresolved_behavior(ppu_model):
    ppu_model.sas[0].behavior = "pb-missing"
    _, diags = resolve_model(ppu_model)
    assert "E_UNRESOLVED_REF" in codes(diags)


def test_duplicate_ids_rejected(ppu_model):
    ppu_model.nodes.append(M.Node("node-cx5020", "Other", cycle_time_ms=10.0))
    _, diags = resolve_model(ppu_model)
    assert "E_DUP_ID" in codes(diags)


def test_relation_kind_targets(ppu_model):
    # Refine must point at a requirement, Validity at a modeled element.
    ppu_model.relations.append(
        M.RequirementRelation(M.RelationKind.REFINE, "req-angle", "sa-mva"))
    _, diags = resolve_model(ppu_model)
    assert "E_RELATION_KIND" in codes(diags)


def test_validity_to_requirement_rejected(ppu_model):
    ppu_model.relations.append(
        M.RequirementRelation(M.RelationKind.VALIDITY, "req-angle", "req-sort"))
    _, diags = resolve_model(ppu_model)
    assert "E_RELATION_KIND" in codes(diags)


def test_feature_resolution_roles(ppu_model):
    resolved, _ = resolve_model(ppu_model)
    vc = resolved.block_by_id["pb-vc"]

    own_in = resolved.resolve_feature(vc, "self", "Input")
    assert own_in.readable and not own_in.writable

    own_out = resolved.resolve_feature(vc, "self", "Angle")
    assert own_out.readable and own_out.writable

    cp_in = resolved.resolve_feature(vc, "conv", "raw")
    assert cp_in.writable and not cp_in.readable
    cp_out = resolved.resolve_feature(vc, "conv", "deg")
    assert cp_out.readable and not cp_out.writable

    assert resolved.resolve_feature(vc, "self", "nope") is None
    assert resolved.resolve_feature(vc, "ghost", "x") is None


def test_feature_resolution_case_insensitive(ppu_model):
    resolved, _ = resolve_model(ppu_model)
    vc = resolved.block_by_id["pb-vc"]
    ref = resolved.resolve_feature(vc, "SELF", "angle")
    assert ref is not None and ref.feature == "Angle"


def test_part_feature_resolution():
    inner = M.PersistentBlock(
        id="pb-in", name="Inner",
        in_ports=[M.BlockPort("X", DataType.INT)],
        out_ports=[M.BlockPort("Y", DataType.INT)],
        flows=[M.OrderedFlow("self", "X", "self", "Y", 1)])
    outer = M.PersistentBlock(
        id="pb-out", name="Outer",
        parts=[M.PartProperty("fb1", "pb-in", 2)],
        in_ports=[M.BlockPort("In", DataType.INT)],
        out_ports=[M.BlockPort("Out", DataType.INT)],
        flows=[M.OrderedFlow("self", "In", "fb1", "X", 1),
               M.OrderedFlow("fb1", "Y", "self", "Out", 3)])
    model = M.Model(blocks=[inner, outer])
    resolved, diags = resolve_model(model)
    assert not errors(diags)
    to_part = resolved.resolve_feature(outer, "fb1", "X")
    assert to_part.writable and not to_part.readable
    from_part = resolved.resolve_feature(outer, "fb1", "Y")
    assert from_part.readable and not from_part.writable


def test_refine_cycle_detected():
    model = M.Model(
        requirements=[
            M.Requirement("r1", "A", kind=M.RequirementKind.FUNCTIONAL),
            M.Requirement("r2", "B", kind=M.RequirementKind.FUNCTIONAL),
        ],
        relations=[
            M.RequirementRelation(M.RelationKind.REFINE, "r1", "r2"),
            M.RequirementRelation(M.RelationKind.REFINE, "r2", "r1"),
        ])
    cycle = M.refine_cycle(model)
    assert cycle is not None
    assert set(cycle) >= {"r1", "r2"}


def test_no_refine_cycle(ppu_model):
    assert M.refine_cycle(ppu_model) is None


def test_flow_constraint_owner(ppu_model):
    vc = next(b for b in ppu_model.blocks if b.id == "pb-vc")
    attached = [f for f in vc.flows if vc.flow_constraint_owner(f)]
    assert len(attached) == 2
    assert all(vc.flow_constraint_owner(f) == "conv" for f in attached)


def test_member_names_covers_every_member():
    block = M.PersistentBlock(
        id="b", name="B",
        parts=[M.PartProperty("p", "x")],
        values=[M.ValueProperty("v", DataType.INT)],
        constraints=[M.ConstraintProperty("c", "y")],
        in_ports=[M.BlockPort("i", DataType.INT)],
        out_ports=[M.BlockPort("o", DataType.INT)])
    assert sorted(block.member_names()) == ["c", "i", "o", "p", "v"]


def test_directed_port_lookup(ppu_model):
    resolved, _ = resolve_model(ppu_model)
    end = M.ConnectionEnd("sa-vc", "Angle")
    port = resolved.port_of(end)
    assert port.direction is PortDirection.OUT
    assert port.data_type is DataType.REAL
    assert resolved.port_of(M.ConnectionEnd("sa-vc", "nope")) is None
