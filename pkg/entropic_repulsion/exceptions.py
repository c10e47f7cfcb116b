"""Errors raised by the laboratory."""


class LabError(Exception):
    pass


class DomainError(LabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(LabError):
    """A value violates a documented precondition, e.g. an unnormalized density."""


class SolverError(LabError):
    pass


class RangeError(LabError):
    """An evaluation fell outside the range covered by a rate table."""


class SimulationError(LabError):
    pass


class InfeasibleSimulationError(SimulationError):
    """Rejection sampling accepted no path at all."""
