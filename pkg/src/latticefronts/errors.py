"""Exception types; the CLI maps each to an exit code."""


class ConfigError(ValueError):
    """Invalid configuration or parameters (exit code 2)."""


class HypothesisError(ValueError):
    """A standing hypothesis fails for the given medium (exit code 3)."""


class AnsatzError(ValueError):
    """The super/sub-solution construction is refused (exit code 4)."""


class NoSupercriticalRoot(AnsatzError):
    """Requested speed is not above the critical speed."""


class NumericalAbort(RuntimeError):
    """Integration could not proceed within tolerances (exit code 5)."""
