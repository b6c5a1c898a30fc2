"""Shared fixtures: the crane demo plant, a three-node chain and scenarios."""

import json

import pytest

import maspc.model as M
from maspc.format import serialize_model
from maspc.model import DataType, PortDirection


def build_ppu(mva_ms: float = 3.0) -> M.Model:
    """Two-node crane model: angle acquisition on CX5020 feeds value
    conversion on CX5010, which drives the crane actuator."""
    convert = M.TransientBlock(
        id="tb-convert", name="Convert",
        params=[
            M.ConstraintParameter("raw", DataType.INT, PortDirection.IN),
            M.ConstraintParameter("deg", DataType.REAL, PortDirection.OUT),
        ],
        body=["deg := INT_TO_REAL(raw) * 0.1;"])
    mva_block = M.PersistentBlock(
        id="pb-mva", name="MVA_Block",
        in_ports=[M.BlockPort("Raw", DataType.INT)],
        out_ports=[M.BlockPort("Output", DataType.INT)],
        flows=[M.OrderedFlow("self", "Raw", "self", "Output", 1)])
    vc_block = M.PersistentBlock(
        id="pb-vc", name="VC_Block",
        constraints=[M.ConstraintProperty("conv", "tb-convert", 1)],
        in_ports=[M.BlockPort("Input", DataType.INT)],
        out_ports=[M.BlockPort("Angle", DataType.REAL)],
        flows=[
            M.OrderedFlow("self", "Input", "conv", "raw", 0),
            M.OrderedFlow("conv", "deg", "self", "Angle", 0),
        ])

    return M.Model(
        requirements=[
            M.Requirement("req-sort", "TransportBehavior",
                          "The crane transports workpieces to the correct ramp.",
                          M.RequirementKind.FUNCTIONAL),
            M.Requirement("req-angle", "AngleMeasurement",
                          "The crane position is measured as an angle.",
                          M.RequirementKind.FUNCTIONAL),
            M.Requirement("req-time", "AcquisitionLatency",
                          "Angle acquisition completes within the budget.",
                          M.RequirementKind.NON_FUNCTIONAL,
                          [M.ReqProperty("responseTime", 10, "ms")]),
        ],
        relations=[
            M.RequirementRelation(M.RelationKind.REFINE, "req-angle", "req-sort"),
            M.RequirementRelation(M.RelationKind.VALIDITY, "req-angle", "af-transport"),
            M.RequirementRelation(M.RelationKind.VALIDITY, "req-time", "sa-mva"),
        ],
        afs=[M.AutomationFunction("af-transport", "TransportWorkpiece",
                                  children=["sa-mva", "sa-vc"])],
        sas=[
            M.SoftwareApplication(
                "sa-mva", "MeasuredValueAcquisition",
                ports=[M.DirectedPort("Raw", PortDirection.IN, DataType.INT),
                       M.DirectedPort("Output", PortDirection.OUT, DataType.INT)],
                behavior="pb-mva", execution_time_ms=mva_ms),
            M.SoftwareApplication(
                "sa-vc", "ValueConversion",
                ports=[M.DirectedPort("Input", PortDirection.IN, DataType.INT),
                       M.DirectedPort("Angle", PortDirection.OUT, DataType.REAL)],
                behavior="pb-vc", execution_time_ms=2.0),
        ],
        nodes=[
            M.Node("node-cx5020", "CX5020", bus_type="EtherCAT",
                   bus_address="1001", vendor_stereotype="Beckhoff CX5020_HW",
                   ams_net_id="5.18.30.40.1.1", cycle_time_ms=10.0,
                   memory_kb=65536.0),
            M.Node("node-cx5010", "CX5010", bus_type="EtherCAT",
                   bus_address="1002", vendor_stereotype="Beckhoff CX5010_HW",
                   ams_net_id="5.18.30.41.1.1", cycle_time_ms=10.0,
                   memory_kb=65536.0),
        ],
        sensors=[M.Sensor(
            "dev-angle", "AngleSensor", device_type="angle transmitter",
            bus_type="EtherCAT", bus_address="2001",
            ports=[M.DirectedPort("Value", PortDirection.OUT, DataType.INT)])],
        actuators=[M.Actuator(
            "dev-crane", "CraneDrive", device_type="rotary drive",
            bus_type="EtherCAT", bus_address="2002",
            ports=[M.DirectedPort("Setpoint", PortDirection.IN, DataType.REAL)])],
        allocations=[
            M.Allocation("sa-mva", "node-cx5020"),
            M.Allocation("sa-vc", "node-cx5010"),
        ],
        connections=[
            M.Connection("con-sense", M.ConnectionKind.DATA,
                         M.ConnectionEnd("dev-angle", "Value"),
                         M.ConnectionEnd("sa-mva", "Raw")),
            M.Connection("con-xfer", M.ConnectionKind.DATA,
                         M.ConnectionEnd("sa-mva", "Output"),
                         M.ConnectionEnd("sa-vc", "Input")),
            M.Connection("con-drive", M.ConnectionKind.DATA,
                         M.ConnectionEnd("sa-vc", "Angle"),
                         M.ConnectionEnd("dev-crane", "Setpoint")),
        ],
        blocks=[convert, mva_block, vc_block])


def build_chain() -> M.Model:
    """Three stages on three nodes; two connections cross node boundaries."""
    pass_block = M.PersistentBlock(
        id="pb-pass", name="PassBlk",
        in_ports=[M.BlockPort("Din", DataType.INT)],
        out_ports=[M.BlockPort("Dout", DataType.INT)],
        flows=[M.OrderedFlow("self", "Din", "self", "Dout", 1)])

    def stage(i: int) -> M.SoftwareApplication:
        return M.SoftwareApplication(
            f"sa-stage{i}", f"Stage{i}",
            ports=[M.DirectedPort("Din", PortDirection.IN, DataType.INT),
                   M.DirectedPort("Dout", PortDirection.OUT, DataType.INT)],
            behavior="pb-pass", execution_time_ms=1.0)

    def plc(i: int) -> M.Node:
        return M.Node(f"node-plc{i}", f"Plc{i}", bus_type="EtherCAT",
                      bus_address=str(3000 + i), ams_net_id=f"10.0.0.{i}.1.1",
                      cycle_time_ms=10.0, memory_kb=1024.0)

    return M.Model(
        sas=[stage(1), stage(2), stage(3)],
        nodes=[plc(1), plc(2), plc(3)],
        sensors=[M.Sensor(
            "dev-src", "SourceSensor", bus_type="EtherCAT", bus_address="3101",
            ports=[M.DirectedPort("Value", PortDirection.OUT, DataType.INT)])],
        actuators=[M.Actuator(
            "dev-sink", "SinkDrive", bus_type="EtherCAT", bus_address="3102",
            ports=[M.DirectedPort("Setpoint", PortDirection.IN, DataType.INT)])],
        allocations=[M.Allocation(f"sa-stage{i}", f"node-plc{i}")
                     for i in (1, 2, 3)],
        connections=[
            M.Connection("con-src", M.ConnectionKind.DATA,
                         M.ConnectionEnd("dev-src", "Value"),
                         M.ConnectionEnd("sa-stage1", "Din")),
            M.Connection("con-12", M.ConnectionKind.DATA,
                         M.ConnectionEnd("sa-stage1", "Dout"),
                         M.ConnectionEnd("sa-stage2", "Din")),
            M.Connection("con-23", M.ConnectionKind.DATA,
                         M.ConnectionEnd("sa-stage2", "Dout"),
                         M.ConnectionEnd("sa-stage3", "Din")),
            M.Connection("con-sink", M.ConnectionKind.DATA,
                         M.ConnectionEnd("sa-stage3", "Dout"),
                         M.ConnectionEnd("dev-sink", "Setpoint")),
        ],
        blocks=[pass_block])


PPU_SCENARIO = {
    "cycles": 6,
    "commDelayCycles": 1,
    "stimulus": {
        "0": {"CX5020.Raw": 123},
        "3": {"CX5020.Raw": 456},
    },
}


@pytest.fixture
def ppu_model() -> M.Model:
    return build_ppu()


@pytest.fixture
def ppu_text() -> str:
    return serialize_model(build_ppu())


@pytest.fixture
def chain_model() -> M.Model:
    return build_chain()


@pytest.fixture
def ppu_scenario_text() -> str:
    return json.dumps(PPU_SCENARIO)
