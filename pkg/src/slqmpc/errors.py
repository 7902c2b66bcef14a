"""Exception types shared across the library."""


class ConstraintRankError(RuntimeError):
    """Equality-constraint input Jacobian lost full row rank."""


class ScenarioError(ValueError):
    """Scenario file is malformed, has unknown keys, or inconsistent values."""


class SimulationDiverged(RuntimeError):
    """Closed-loop plant state left the finite range."""
