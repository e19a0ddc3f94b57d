"""Exception types, grouped by how the CLI maps them to exit codes.

ConfigError and its subclasses are user-input problems (exit 2); everything
else that escapes a command is a runtime/solver failure (exit 3).
"""


class ConfigError(Exception):
    """Invalid configuration, CLI usage, or malformed input file."""


class TraceFileError(ConfigError):
    """Channel or traffic trace CSV is missing, malformed, or wrongly sized."""


class LpParseError(ConfigError):
    """LP problem text violates the restricted grammar; message names the line."""


class XmlParseError(Exception):
    """Solution XML is missing required structure or holds unparseable numbers."""


class SolverFailure(Exception):
    """An external solver call failed: bad exit code, missing or bad output."""


class SolverTimeout(SolverFailure):
    """External solver exceeded its configured wall-clock budget."""


class InstanceTooLarge(Exception):
    """Exhaustive enumeration guard tripped; use the branch-and-bound solver."""


class ContractViolation(Exception):
    """An internal invariant broke: scheduler, decoder, or dominance bug."""
