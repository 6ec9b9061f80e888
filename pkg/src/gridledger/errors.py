"""Exception types shared across the package."""

from __future__ import annotations


class GridLedgerError(Exception):
    """Base class for all package-specific errors."""


class NetworkFormatError(GridLedgerError):
    """A network, scenario, or contracts document does not match the file format."""


class NetworkStructureError(GridLedgerError):
    """The network graph cannot support power-flow algebra (e.g. islanded buses)."""

    def __init__(self, message: str, unreachable: tuple[str, ...] = ()):
        super().__init__(message)
        self.unreachable = tuple(unreachable)


class InvalidNetworkError(GridLedgerError):
    """A network failed validation; carries the offending report."""

    def __init__(self, report):
        self.report = report
        lines = "; ".join(v.message for v in report.violations)
        super().__init__(f"network failed validation: {lines}")


class InjectionBalanceError(GridLedgerError):
    """Nodal injections handed to flow reconstruction do not sum to zero."""


class SimplexError(GridLedgerError):
    """The LP solver hit a numerical failure (singular basis, iteration limit)."""


class OPFInfeasibleError(GridLedgerError):
    """No dispatch satisfies the balance and line constraints."""

    def __init__(self, certificate: str = ""):
        self.certificate = certificate
        detail = f" (certificate: {certificate})" if certificate else ""
        super().__init__(f"optimal power flow is infeasible{detail}")


class OPFUnboundedError(GridLedgerError):
    """The dispatch problem is unbounded below (malformed costs)."""

    def __init__(self, certificate: str = ""):
        self.certificate = certificate
        detail = f" (certificate: {certificate})" if certificate else ""
        super().__init__(f"optimal power flow is unbounded{detail}")


class RateUnavailableError(GridLedgerError):
    """Neither perturbation direction produced a solvable problem."""


class UndefinedRateError(GridLedgerError):
    """A rate's denominator vanished (zero generation, fully contracted grid)."""


class ContractViolationError(GridLedgerError):
    """Contracted energy is inconsistent with the load or generator it references."""


class MissingRateError(GridLedgerError):
    """A ledger needs a rate for an element that the rate sweep did not produce."""


class StorageScheduleError(GridLedgerError):
    """A storage schedule discharges energy that was never stored."""


class ScenarioError(GridLedgerError):
    """A scenario delta is malformed or references unknown elements."""


class ScenarioInfeasibleError(GridLedgerError):
    """The modified network cannot be dispatched; carries the LP certificate."""

    def __init__(self, certificate: str = ""):
        self.certificate = certificate
        detail = f" (violated constraint: {certificate})" if certificate else ""
        super().__init__(f"scenario produces an infeasible network{detail}")
