"""Exception hierarchy and the CLI exit codes attached to each class."""


class SwitchError(Exception):
    exit_code = 1


class ConfigError(SwitchError, ValueError):
    """Invalid run configuration, bad numerical settings, unknown keys."""

    exit_code = 2


class DomainError(SwitchError, ValueError):
    """A physical input lies outside the model's validity window."""

    exit_code = 3


class PreconditionError(DomainError):
    """Arguments are individually valid but inconsistent with each other."""


class OutputError(SwitchError, OSError):
    exit_code = 4


class ConvergenceError(SwitchError):
    exit_code = 5
