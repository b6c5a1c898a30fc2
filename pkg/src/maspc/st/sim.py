"""Lock-step multi-node simulation over the generated project.

All nodes advance cycle by cycle together.  A value published at the end of
cycle k is written into the subscriber's exchange variable at the start of
cycle k + commDelayCycles.  The simulation is a passive state machine: the
caller (CLI batch run or debug service) drives it with step/run calls.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from ..codegen import ArtifactKind, GeneratedProject
from ..diagnostics import (
    Diagnostic,
    E_RUNTIME,
    E_SYNTAX,
    E_UNKNOWN_KEY,
    E_UNKNOWN_NAME,
    E_VALUE,
)
from ..model import Scalar
from . import parser as st_parser
from .interp import BreakpointHit, NodeRuntime, RuntimeFault, Value, coerce_scalar


class SimulationError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass
class Scenario:
    cycles: int
    comm_delay_cycles: int = 1
    stimulus: dict[int, dict[str, Scalar]] = field(default_factory=dict)


def parse_scenario(text: str) -> tuple[Scenario, list[Diagnostic]]:
    """Parse a `.scn.json` document."""
    diags: list[Diagnostic] = []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        diags.append(Diagnostic.error(
            E_SYNTAX, f"line {exc.lineno}, column {exc.colno}", exc.msg))
        return Scenario(0), diags
    if not isinstance(doc, dict):
        diags.append(Diagnostic.error(E_SYNTAX, "", "document root must be an object"))
        return Scenario(0), diags
    for key in doc:
        if key not in ("cycles", "commDelayCycles", "stimulus"):
            diags.append(Diagnostic.error(E_UNKNOWN_KEY, key, f"unknown key '{key}'"))
    cycles = doc.get("cycles")
    if not isinstance(cycles, int) or isinstance(cycles, bool) or cycles < 0:
        diags.append(Diagnostic.error(
            E_VALUE, "cycles", "cycles must be a non-negative integer"))
        cycles = 0
    delay = doc.get("commDelayCycles", 1)
    if not isinstance(delay, int) or isinstance(delay, bool) or delay < 1:
        diags.append(Diagnostic.error(
            E_VALUE, "commDelayCycles", "commDelayCycles must be an integer >= 1"))
        delay = 1
    stimulus: dict[int, dict[str, Scalar]] = {}
    raw_stim = doc.get("stimulus", {})
    if not isinstance(raw_stim, dict):
        diags.append(Diagnostic.error(E_VALUE, "stimulus", "stimulus must be an object"))
        raw_stim = {}
    for key, values in raw_stim.items():
        path = f"stimulus.{key}"
        try:
            cycle = int(key)
        except ValueError:
            diags.append(Diagnostic.error(E_VALUE, path, "cycle keys must be integers"))
            continue
        if cycle < 0 or not isinstance(values, dict):
            diags.append(Diagnostic.error(E_VALUE, path, "bad stimulus entry"))
            continue
        clean: dict[str, Scalar] = {}
        for name, value in values.items():
            if not isinstance(value, (bool, int, float)):
                diags.append(Diagnostic.error(
                    E_VALUE, f"{path}.{name}", "stimulus values must be scalars"))
                continue
            clean[name] = value
        stimulus[cycle] = clean
    return Scenario(cycles, delay, stimulus), diags


def _parse_runtime(node_id: str, display: str,
                   artifacts) -> NodeRuntime:
    program = None
    fbs: dict[str, object] = {}
    fcs: dict[str, object] = {}
    for artifact in artifacts:
        unit = st_parser.parse_artifact(artifact.full_text())
        if artifact.kind is ArtifactKind.PROGRAM:
            program = unit
        elif artifact.kind is ArtifactKind.FUNCTION_BLOCK:
            fbs[unit.name] = unit
        else:
            fcs[unit.name] = unit
    if program is None:
        raise SimulationError(E_RUNTIME, f"node '{display}' has no program")
    return NodeRuntime(node_id, display, program, fbs, fcs)


class Simulation:
    """All node runtimes plus the exchange pipes between them."""

    def __init__(self, project: GeneratedProject,
                 scenario: Scenario | None = None):
        self.project = project
        self.scenario = scenario or Scenario(0)
        if self.scenario.comm_delay_cycles < 1:
            raise SimulationError(
                E_VALUE, "commDelayCycles must be an integer >= 1")
        self.runtimes: list[NodeRuntime] = []
        self._by_display: dict[str, NodeRuntime] = {}
        self._by_id: dict[str, NodeRuntime] = {}
        for node_id, artifacts in project.per_node.items():
            display = project.node_dirs[node_id]
            runtime = _parse_runtime(node_id, display, artifacts)
            self.runtimes.append(runtime)
            self._by_display[display.lower()] = runtime
            self._by_id[node_id] = runtime
        # exchange pipes: one queue of (deliver_at_cycle, Value) per entry
        self._pipes: list[tuple[object, deque]] = [
            (entry, deque()) for entry in project.comm.entries
            if entry.publisher_node in self._by_id
            and entry.subscriber_node in self._by_id
        ]
        self.cycle = 0  # index of the cycle currently running or next to run
        self._mid_cycle = False
        self._cursor = 0  # index into runtimes during a cycle
        self._plan = self._compile_stimulus()

    # -- stimulus -----------------------------------------------------------

    def _compile_stimulus(self) -> dict[int, dict[str, dict[str, Value]]]:
        plan: dict[int, dict[str, dict[str, Value]]] = {}
        for cycle, entries in self.scenario.stimulus.items():
            per_node: dict[str, dict[str, Value]] = {}
            for name, raw in entries.items():
                node_part, _, var = name.partition(".")
                runtime = self._by_display.get(node_part.lower())
                if runtime is None or not var:
                    raise SimulationError(
                        E_UNKNOWN_NAME, f"stimulus name '{name}' does not "
                        f"resolve to a node variable")
                canonical = runtime.program.canonical(var)
                if canonical is None or canonical not in runtime.program.vars:
                    raise SimulationError(
                        E_UNKNOWN_NAME, f"stimulus name '{name}' does not "
                        f"resolve to a node variable")
                try:
                    value = coerce_scalar(
                        runtime.program.vars[canonical].type, raw, name)
                except RuntimeFault as exc:
                    raise SimulationError(E_VALUE, exc.message)
                per_node.setdefault(runtime.node_id, {})[canonical] = value
            plan[cycle] = per_node
        return plan

    # -- cycle machinery ----------------------------------------------------

    def _begin_cycle(self) -> None:
        for entry, queue in self._pipes:
            runtime = self._by_id[entry.subscriber_node]
            while queue and queue[0][0] <= self.cycle:
                _, value = queue.popleft()
                runtime.write(runtime.program,
                              st_parser.Name((entry.variable,)),
                              value.type, value.py)
        per_node = self._plan.get(self.cycle, {})
        for runtime in self.runtimes:
            runtime.start_scan(per_node.get(runtime.node_id))
        self._mid_cycle = True
        self._cursor = 0

    def _finish_cycle(self) -> None:
        for entry, queue in self._pipes:
            runtime = self._by_id[entry.publisher_node]
            canonical = runtime.program.canonical(entry.variable)
            value = runtime.program.vars[canonical]
            queue.append((self.cycle + self.scenario.comm_delay_cycles, value))
        self._mid_cycle = False
        self.cycle += 1

    def _current_runtime(self) -> NodeRuntime | None:
        while self._cursor < len(self.runtimes):
            runtime = self.runtimes[self._cursor]
            if runtime.scanning():
                return runtime
            self._cursor += 1
        return None

    def mid_cycle(self) -> bool:
        return self._mid_cycle

    def _annotate(self, fault: RuntimeFault) -> RuntimeFault:
        if fault.cycle is None:
            fault.cycle = self.cycle
        self._mid_cycle = False
        return fault

    def step_statement(self) -> BreakpointHit | None:
        """Advance by at most one statement across the whole system."""
        if not self._mid_cycle:
            self._begin_cycle()
        runtime = self._current_runtime()
        if runtime is not None:
            try:
                hit = runtime.step()
            except RuntimeFault as fault:
                raise self._annotate(fault)
            if hit is not None:
                return hit
            runtime = self._current_runtime()
        if runtime is None:
            self._finish_cycle()
        return None

    def run_cycle(self) -> BreakpointHit | None:
        """Run to the end of the current cycle or to a breakpoint."""
        if not self._mid_cycle:
            self._begin_cycle()
        while True:
            runtime = self._current_runtime()
            if runtime is None:
                self._finish_cycle()
                return None
            try:
                hit = runtime.run_scan()
            except RuntimeFault as fault:
                raise self._annotate(fault)
            if hit is not None:
                return hit

    def run(self, cycles: int) -> BreakpointHit | None:
        for _ in range(cycles):
            hit = self.run_cycle()
            if hit is not None:
                return hit
        return None

    # -- debug access -------------------------------------------------------

    def _split(self, qualified: str) -> tuple[NodeRuntime, str]:
        node_part, _, rest = qualified.partition(".")
        runtime = self._by_display.get(node_part.lower())
        if runtime is None or not rest:
            raise KeyError(qualified)
        return runtime, rest

    def lookup(self, qualified: str) -> Value:
        runtime, rest = self._split(qualified)
        found = runtime.find_path(rest)
        if found is None:
            raise KeyError(qualified)
        owner, canonical = found
        return owner.vars[canonical]

    def canonical_name(self, qualified: str) -> str:
        runtime, rest = self._split(qualified)
        found = runtime.find_path(rest)
        if found is None:
            raise KeyError(qualified)
        owner, canonical = found
        return f"{runtime.display_name}.{owner.path}.{canonical}"

    def is_forced(self, qualified: str) -> bool:
        runtime, rest = self._split(qualified)
        found = runtime.find_path(rest)
        if found is None:
            raise KeyError(qualified)
        owner, canonical = found
        return f"{owner.path}.{canonical}" in runtime.forces

    def set_force(self, qualified: str, raw: Scalar) -> str:
        runtime, rest = self._split(qualified)
        try:
            full = runtime.set_force(rest, raw)
        except RuntimeFault as exc:
            raise SimulationError(E_VALUE, exc.message)
        return f"{runtime.display_name}.{full}"

    def clear_force(self, qualified: str) -> str:
        runtime, rest = self._split(qualified)
        return f"{runtime.display_name}.{runtime.clear_force(rest)}"

    def set_breakpoint(self, artifact: str, index: int,
                       node: str | None = None) -> list[str]:
        return self._toggle_breakpoint(artifact, index, node, add=True)

    def clear_breakpoint(self, artifact: str, index: int,
                         node: str | None = None) -> list[str]:
        return self._toggle_breakpoint(artifact, index, node, add=False)

    def _toggle_breakpoint(self, artifact: str, index: int,
                           node: str | None, add: bool) -> list[str]:
        touched: list[str] = []
        wanted = artifact.lower()
        for runtime in self.runtimes:
            if node is not None and runtime.display_name.lower() != node.lower():
                continue
            unit = None
            if runtime.program.unit.name.lower() == wanted:
                unit = runtime.program.unit
            else:
                unit = runtime.fb_units.get(wanted)
            if unit is None:
                continue
            if not 0 <= index < unit.statement_count:
                raise SimulationError(
                    E_UNKNOWN_NAME,
                    f"artifact '{unit.name}' has no statement {index}")
            key = (wanted, index)
            if add:
                runtime.breakpoints.add(key)
            else:
                runtime.breakpoints.discard(key)
            touched.append(runtime.display_name)
        if not touched:
            raise SimulationError(
                E_UNKNOWN_NAME, f"no artifact named '{artifact}'")
        return touched

    def paused_location(self) -> tuple[str, str, int, str] | None:
        """(node, artifact, statementIndex, instancePath) of the next
        statement, when stopped mid-cycle."""
        if not self._mid_cycle:
            return None
        runtime = self._current_runtime()
        if runtime is None:
            return None
        location = runtime.current_location()
        if location is None:
            return None
        artifact, index, path = location
        return runtime.display_name, artifact, index, path

    def snapshot(self) -> dict[str, Value]:
        merged: dict[str, Value] = {}
        for runtime in self.runtimes:
            for path, value in runtime.image().items():
                merged[f"{runtime.display_name}.{path}"] = value
        return merged

    def forced_names(self) -> set[str]:
        names: set[str] = set()
        for runtime in self.runtimes:
            for path in runtime.forces:
                names.add(f"{runtime.display_name}.{path}")
        return names


@dataclass
class Trace:
    snapshots: list[dict]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s, ensure_ascii=False, sort_keys=False) + "\n"
                       for s in self.snapshots)


def run_simulation(project: GeneratedProject, scenario: Scenario) -> Trace:
    """Batch execution: one snapshot per completed cycle."""
    sim = Simulation(project, scenario)
    snapshots = []
    for index in range(scenario.cycles):
        hit = sim.run_cycle()
        if hit is not None:  # pragma: no cover - batch runs set no breakpoints
            raise SimulationError(
                E_RUNTIME, f"unexpected breakpoint at {hit.artifact}#{hit.index}")
        values = {name: value.json() for name, value in sim.snapshot().items()}
        snapshots.append({"cycle": index, "values": values})
    return Trace(snapshots)
