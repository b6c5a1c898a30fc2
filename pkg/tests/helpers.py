"""Shared test machinery: a random block corpus and an independent oracle.

The oracle interprets a PersistentBlock's sorted members directly on the
model, with its own IEC numeric semantics (two's-complement wrapping,
truncating division, binary32 quantization).  It never touches the code
generator or the ST interpreter, so agreement between the two routes is
meaningful.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass

import maspc.model as M
from maspc.model import DataType

INT_MIN, INT_MAX = -(2 ** 15), 2 ** 15 - 1
DINT_MIN, DINT_MAX = -(2 ** 31), 2 ** 31 - 1

SCALARS = (DataType.BOOL, DataType.INT, DataType.DINT,
           DataType.REAL, DataType.LREAL)


def f32(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


def wrap16(x: int) -> int:
    x &= 0xFFFF
    return x - 0x10000 if x >= 0x8000 else x


def wrap32(x: int) -> int:
    x &= 0xFFFFFFFF
    return x - 0x100000000 if x >= 0x80000000 else x


def trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def default_of(dtype: DataType):
    if dtype is DataType.BOOL:
        return False
    if dtype in (DataType.INT, DataType.DINT):
        return 0
    return 0.0


def quantize(dtype: DataType, value):
    if dtype is DataType.REAL:
        return f32(float(value))
    if dtype is DataType.LREAL:
        return float(value)
    return value


# -- TransientBlock template library -----------------------------------------
# Each template fixes the FC body text and an equivalent plain-Python
# function implementing the same IEC semantics by hand.

@dataclass(frozen=True)
class TbTemplate:
    key: str
    in_types: tuple[DataType, ...]
    out_type: DataType
    body: tuple[str, ...]
    fn: object  # callable(*values) -> python value

    @property
    def name(self) -> str:
        return f"Fc_{self.key}"

    @property
    def block_id(self) -> str:
        return f"tb-{self.key}"

    def transient_block(self) -> M.TransientBlock:
        params = [
            M.ConstraintParameter(f"p{i + 1}", t, M.PortDirection.IN)
            for i, t in enumerate(self.in_types)
        ]
        params.append(M.ConstraintParameter("res", self.out_type,
                                            M.PortDirection.OUT))
        return M.TransientBlock(id=self.block_id, name=self.name,
                                params=params, body=list(self.body))


TEMPLATES = [
    TbTemplate("scale", (DataType.INT,), DataType.REAL,
               ("res := INT_TO_REAL(p1) * 0.1;",),
               lambda a: f32(f32(float(a)) * f32(0.1))),
    TbTemplate("offset", (DataType.INT,), DataType.INT,
               ("res := p1 + 7;",),
               lambda a: wrap16(a + 7)),
    TbTemplate("sum2", (DataType.INT, DataType.INT), DataType.INT,
               ("res := p1 + p2 - 1;",),
               lambda a, b: wrap16(wrap16(a + b) - 1)),
    TbTemplate("widen", (DataType.INT,), DataType.DINT,
               ("res := INT_TO_DINT(p1) * 1000;",),
               lambda a: wrap32(a * 1000)),
    TbTemplate("blend", (DataType.REAL, DataType.REAL), DataType.REAL,
               ("res := p1 * p2 + 0.5;",),
               lambda a, b: f32(f32(a * b) + f32(0.5))),
    TbTemplate("gate", (DataType.BOOL, DataType.INT), DataType.INT,
               ("res := p2;", "IF p1 THEN", "    res := 0 - p2;", "END_IF;"),
               lambda a, b: wrap16(0 - b) if a else b),
    TbTemplate("lsum", (DataType.DINT, DataType.DINT), DataType.DINT,
               ("res := p1 + p2;",),
               lambda a, b: wrap32(a + b)),
    TbTemplate("precise", (DataType.REAL,), DataType.LREAL,
               ("res := REAL_TO_LREAL(p1) * 2.0;",),
               lambda a: float(a) * 2.0),
    TbTemplate("half", (DataType.INT,), DataType.INT,
               ("res := p1 / 2;",),
               lambda a: trunc_div(a, 2)),
    TbTemplate("rem", (DataType.INT,), DataType.INT,
               ("res := p1 MOD 3;",),
               lambda a: a - trunc_div(a, 3) * 3),
    TbTemplate("twostep", (DataType.INT, DataType.INT), DataType.INT,
               ("res := p1 * 2;", "res := res + p2;",),
               lambda a, b: wrap16(wrap16(a * 2) + b)),
]
TEMPLATE_BY_KEY = {t.key: t for t in TEMPLATES}


def random_scalar(rng: random.Random, dtype: DataType):
    if dtype is DataType.BOOL:
        return rng.random() < 0.5
    if dtype is DataType.INT:
        return rng.randint(INT_MIN, INT_MAX)
    if dtype is DataType.DINT:
        return rng.randint(DINT_MIN, DINT_MAX)
    # keep reals modest so template arithmetic cannot overflow to inf
    value = rng.uniform(-1000.0, 1000.0)
    return f32(value) if dtype is DataType.REAL else value


# -- random valid blocks ------------------------------------------------------


@dataclass
class BlockCase:
    """One random PersistentBlock plus everything needed to evaluate it."""
    block: M.PersistentBlock
    templates: dict[str, TbTemplate]  # CP name -> template
    transients: list[M.TransientBlock]

    def template_of_cp(self, cp_name: str) -> TbTemplate:
        return self.templates[cp_name]


def random_block(rng: random.Random, index: int = 0,
                 min_invoked: int = 0) -> BlockCase:
    """A restriction-conforming block with ports, values, constraint
    invocations and free flows; at most 8 members and 12 flows."""
    in_ports = [M.BlockPort(f"In{i + 1}", rng.choice(SCALARS))
                for i in range(rng.randint(1, 3))]
    out_ports = [M.BlockPort(f"Out{i + 1}", rng.choice(SCALARS))
                 for i in range(rng.randint(1, 2))]
    values = [M.ValueProperty(f"Val{i + 1}", rng.choice(SCALARS))
              for i in range(rng.randint(0, 2))]
    for value in values:
        if rng.random() < 0.7:
            value.initial_value = random_scalar(rng, value.data_type)

    cp_templates: dict[str, TbTemplate] = {}
    constraints: list[M.ConstraintProperty] = []
    flows: list[M.OrderedFlow] = []

    readable: dict[DataType, list[str]] = {t: [] for t in SCALARS}
    writable: dict[DataType, list[str]] = {t: [] for t in SCALARS}
    for port in in_ports:
        readable[port.data_type].append(port.name)
    for port in out_ports:
        readable[port.data_type].append(port.name)
        writable[port.data_type].append(port.name)
    for value in values:
        readable[value.data_type].append(value.name)
        writable[value.data_type].append(value.name)

    def member_count() -> int:
        return (len(in_ports) + len(out_ports) + len(values)
                + len(constraints))

    def add_aux(dtype: DataType) -> None:
        prop = M.ValueProperty(f"Aux{len(values) + 1}", dtype)
        if rng.random() < 0.5:
            prop.initial_value = random_scalar(rng, dtype)
        values.append(prop)
        readable[dtype].append(prop.name)
        writable[dtype].append(prop.name)

    for i in range(rng.randint(0, 2)):
        template = rng.choice(TEMPLATES)
        missing = {t for t in template.in_types if not readable[t]}
        extra = len(missing)
        if not writable[template.out_type] and template.out_type not in missing:
            extra += 1
        if member_count() + 1 + extra > 8:
            continue
        for dtype in sorted(missing, key=lambda t: t.value):
            add_aux(dtype)
        if not writable[template.out_type]:
            add_aux(template.out_type)
        cp_name = f"cp{len(constraints) + 1}"
        constraints.append(M.ConstraintProperty(cp_name, template.block_id, 1))
        cp_templates[cp_name] = template
        for j, dtype in enumerate(template.in_types):
            source = rng.choice(readable[dtype])
            flows.append(M.OrderedFlow("self", source, cp_name, f"p{j + 1}", 0))
        target = rng.choice(writable[template.out_type])
        flows.append(M.OrderedFlow(cp_name, "res", "self", target, 0))

    flowable = [t for t in SCALARS if readable[t] and writable[t]]
    low = max(0, min_invoked - len(constraints))
    high = max(low, min(5, 12 - len(flows)))
    free_flows = []
    for _ in range(rng.randint(low, high)):
        dtype = rng.choice(flowable)
        free_flows.append(M.OrderedFlow(
            "self", rng.choice(readable[dtype]),
            "self", rng.choice(writable[dtype]), 0))

    orders = rng.sample(range(1, 40), len(constraints) + len(free_flows))
    for item, order in zip([*constraints, *free_flows], orders):
        item.order_number = order
    flows.extend(free_flows)

    used = sorted({t.key for t in cp_templates.values()})
    block = M.PersistentBlock(
        id=f"pb-case{index}", name=f"Blk{index}",
        values=values, constraints=constraints,
        in_ports=in_ports, out_ports=out_ports, flows=flows)
    return BlockCase(block, cp_templates,
                     [TEMPLATE_BY_KEY[k].transient_block() for k in used])


# -- the independent dataflow oracle ------------------------------------------


def assign_convert(target: DataType, source: DataType, value):
    if target is source:
        return value
    if source is DataType.INT and target is DataType.DINT:
        return value
    if source is DataType.REAL and target is DataType.LREAL:
        return value
    raise AssertionError(f"oracle: bad assignment {source} -> {target}")


def oracle_scan(case: BlockCase, inputs: dict[str, object]) -> dict[str, object]:
    """Evaluate one scan straight off the model: merge the invoked members,
    sort by orderNumber, drop non-positive, apply in order."""
    block = case.block
    state: dict[str, tuple[DataType, object]] = {}
    for port in block.in_ports:
        state[port.name] = (port.data_type,
                            quantize(port.data_type, inputs[port.name]))
    for port in block.out_ports:
        state[port.name] = (port.data_type, default_of(port.data_type))
    for prop in block.values:
        if prop.initial_value is not None:
            state[prop.name] = (prop.data_type,
                                quantize(prop.data_type, prop.initial_value))
        else:
            state[prop.name] = (prop.data_type, default_of(prop.data_type))

    cp_names = {cp.name for cp in block.constraints}
    invoked: list[tuple[int, str, object]] = []
    for cp in block.constraints:
        if cp.order_number > 0:
            invoked.append((cp.order_number, "cp", cp))
    for flow in block.flows:
        attached = (flow.source_instance in cp_names
                    or flow.target_instance in cp_names)
        if not attached and flow.order_number > 0:
            invoked.append((flow.order_number, "flow", flow))
    invoked.sort(key=lambda item: item[0])

    for _, kind, item in invoked:
        if kind == "flow":
            src_type, src_value = state[item.source_feature]
            dst_type = state[item.target_feature][0]
            state[item.target_feature] = (
                dst_type, assign_convert(dst_type, src_type, src_value))
        else:
            template = case.template_of_cp(item.name)
            args = [None] * len(template.in_types)
            out_target = None
            for flow in case.block.flows:
                if flow.target_instance == item.name:
                    position = int(flow.target_feature[1:]) - 1  # pN
                    src_type, src_value = state[flow.source_feature]
                    args[position] = assign_convert(
                        template.in_types[position], src_type, src_value)
                elif flow.source_instance == item.name:
                    out_target = flow.target_feature
            result = template.fn(*args)
            dst_type = state[out_target][0]
            state[out_target] = (
                dst_type, assign_convert(dst_type, template.out_type, result))

    return {name: value for name, (_, value) in state.items()}


# -- restriction corpus mutations --------------------------------------------

MUTATIONS = ("dup_order", "cp_flow_nonzero", "cp_order_nonpositive",
             "free_flow_nonpositive", "tb_out_count")


def mutate_case(rng: random.Random, case: BlockCase,
                mutation: str) -> M.PersistentBlock | M.TransientBlock:
    """Break exactly one restriction; returns the block to validate."""
    block = case.block
    cp_names = {cp.name for cp in block.constraints}
    free_flows = [f for f in block.flows
                  if f.source_instance not in cp_names
                  and f.target_instance not in cp_names]
    if mutation == "dup_order":
        items = [*block.constraints, *free_flows]
        a, b = rng.sample(items, 2)
        b.order_number = a.order_number
        return block
    if mutation == "cp_flow_nonzero":
        bound = [f for f in block.flows
                 if f.source_instance in cp_names
                 or f.target_instance in cp_names]
        flow = rng.choice(bound)
        flow.order_number = rng.choice([-3, -1, 1, 2, 99])
        return block
    if mutation == "cp_order_nonpositive":
        cp = rng.choice(block.constraints)
        cp.order_number = rng.choice([0, -1, -7])
        return block
    if mutation == "free_flow_nonpositive":
        flow = rng.choice(free_flows)
        flow.order_number = rng.choice([0, -2])
        return block
    if mutation == "tb_out_count":
        template = rng.choice(TEMPLATES)
        tb = template.transient_block()
        if rng.random() < 0.5:
            tb.params = [p for p in tb.params
                         if p.direction is M.PortDirection.IN]
        else:
            tb.params.append(M.ConstraintParameter(
                "res2", DataType.INT, M.PortDirection.OUT))
        return tb
    raise AssertionError(f"unknown mutation {mutation}")


EXPECTED_CODE = {
    "dup_order": "E_DUP_ORDER",
    "cp_flow_nonzero": "E_FC_FLOW_NONZERO",
    "cp_order_nonpositive": "E_ORDER_NONPOSITIVE",
    "free_flow_nonpositive": "E_FLOW_ORDER_NONPOSITIVE",
    "tb_out_count": "E_FC_OUT_COUNT",
}


def mutation_applicable(case: BlockCase, mutation: str) -> bool:
    cp_names = {cp.name for cp in case.block.constraints}
    free = [f for f in case.block.flows
            if f.source_instance not in cp_names
            and f.target_instance not in cp_names]
    if mutation == "dup_order":
        return len(case.block.constraints) + len(free) >= 2
    if mutation == "cp_flow_nonzero":
        return bool(cp_names)
    if mutation == "cp_order_nonpositive":
        return bool(case.block.constraints)
    if mutation == "free_flow_nonpositive":
        return bool(free)
    return True
