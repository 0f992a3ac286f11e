"""Exception taxonomy shared by the library and the command-line front end."""


class BeableSimError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(BeableSimError):
    """An input violates a documented precondition or type invariant."""


class CapacityError(ValidationError):
    """A constructed object would exceed the configured dimension cap."""


class ContractError(ValidationError):
    """An operation was invoked outside its stated domain."""


class ZeroProbabilityBranchError(BeableSimError):
    """Attempted collapse onto an outcome of numerically zero probability."""


class ImpossiblePostSelectionError(BeableSimError):
    """The post-selected outcome is unreachable from every intermediate branch."""


class InvariantBreachError(BeableSimError):
    """An internally computed quantity violated a structural invariant."""
