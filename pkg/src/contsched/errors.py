"""Exception hierarchy shared by every contsched module."""


class ContschedError(Exception):
    """Base class for all package errors."""


class ConstraintViolation(ContschedError, ValueError):
    """A task's timing parameters break ``0 < runtime <= wcet <= deadline <= period``."""


class HyperperiodOverflow(ContschedError, OverflowError):
    pass


class Infeasible(ContschedError):
    """Raised by partitioning when some tasks fit on no slice."""

    def __init__(self, unplaced):
        self.unplaced = tuple(unplaced)
        super().__init__("no slice can host: " + ", ".join(self.unplaced))


class InsufficientSamples(ContschedError, ValueError):
    pass


class MissingDistribution(ContschedError, KeyError):
    def __init__(self, task_id):
        self.task_id = task_id
        super().__init__(task_id)

    def __str__(self):
        return f"no run-time distribution for task {self.task_id!r}"


class InvalidStats(ContschedError, ValueError):
    pass


class UnknownProfile(ContschedError, KeyError):
    def __str__(self):
        return f"unknown system profile {self.args[0]!r}"


class ConfigError(ContschedError, ValueError):
    """Simulation or experiment configuration is inconsistent."""


class EmptyInput(ContschedError, ValueError):
    pass


class ParseError(ConfigError):
    """Config text could not be parsed; carries the offending line or field."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(ConfigError):
    pass


class FormatError(ContschedError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}" if path is not None else message)


class InconsistentRecord(FormatError):
    pass


class UnknownCase(ContschedError, ValueError):
    pass
