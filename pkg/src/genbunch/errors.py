"""Exception types raised across the package."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


class CapacityError(ContractError):
    """A size limit (permanent, enumeration, distribution) was exceeded."""


class NotUnitaryError(ContractError):
    pass


class NotPassiveError(ContractError):
    """A network matrix has a singular value above one."""


class NotPhysicalError(ContractError):
    """A J-function whose group matrix is indefinite beyond tolerance."""


class NumericalInconsistencyError(ArithmeticError):
    """A quantity that must be real came out with a significant imaginary part."""


class InfeasibleError(ValueError):
    """No parameter choice satisfies the requested constraints."""
