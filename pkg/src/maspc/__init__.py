"""maspc: a SysML-AT to IEC 61131-3 Structured Text toolchain.

Validate automation models, generate per-node ST artifacts, derive the
cross-node publisher/subscriber exchange plan, simulate everything on a
cyclic-scan interpreter, and debug the running code live.
"""

from .codegen import (
    CodegenError,
    GeneratedProject,
    StArtifact,
    generate_function,
    generate_function_block,
    generate_project,
    write_project,
)
from .comm import CommConfig, CommEntry, CommError, derive_pubsub, emit_comm_config
from .diagnostics import Diagnostic, Severity, ValidationReport
from .format import FILE_EXTENSION, parse_model, serialize_model
from .model import DataType, Model, resolve_model, type_compatible
from .st.sim import (
    Scenario,
    Simulation,
    SimulationError,
    Trace,
    parse_scenario,
    run_simulation,
)
from .validator import validate_block_restrictions, validate_model

__version__ = "0.1.0"

__all__ = [
    "CodegenError",
    "CommConfig",
    "CommEntry",
    "CommError",
    "DataType",
    "Diagnostic",
    "FILE_EXTENSION",
    "GeneratedProject",
    "Model",
    "Scenario",
    "Severity",
    "Simulation",
    "SimulationError",
    "StArtifact",
    "Trace",
    "ValidationReport",
    "__version__",
    "derive_pubsub",
    "emit_comm_config",
    "generate_function",
    "generate_function_block",
    "generate_project",
    "parse_model",
    "parse_scenario",
    "resolve_model",
    "run_simulation",
    "serialize_model",
    "type_compatible",
    "validate_block_restrictions",
    "validate_model",
    "write_project",
]
