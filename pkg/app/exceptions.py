class CheckerError(Exception):
    """Base class for errors raised by the cluster, the operations and the checkers."""


class DeadlockError(CheckerError):
    def __init__(self, blocked: list[int]):
        self.blocked = sorted(blocked)
        super().__init__(f"Deadlock: PEs {self.blocked} are blocked on receives that can never complete")


class ContractViolation(CheckerError, ValueError):
    """A PE program broke the communication contract (bad PE id, width mismatch, ...)."""


class AggregationOverflow(CheckerError, OverflowError):
    pass


class LengthMismatch(CheckerError, ValueError):
    pass


class ManipulationError(CheckerError, ValueError):
    pass


class InfeasibleConfiguration(CheckerError, ValueError):
    pass


class IncompatibleExperiment(CheckerError, ValueError):
    pass
