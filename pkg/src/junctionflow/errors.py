"""Exception types shared across the package and mapped to CLI exit codes."""


class ConfigError(Exception):
    """Invalid experiment configuration; carries every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class CflError(Exception):
    """A time-step gate failed; solving was refused."""


class AuditError(Exception):
    """A stored-trajectory audit exceeded its tolerance."""


class InternalError(Exception):
    """An invariant the construction guarantees was violated (a bug)."""
