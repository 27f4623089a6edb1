"""Exception types shared across the package."""


class EhcellError(Exception):
    """Base class for all package errors."""


class EmptyCatalog(EhcellError, ValueError):
    pass


class InsufficientEnergy(EhcellError, RuntimeError):
    """Raised when energy is spent before it has arrived.

    Policies are expected to check affordability first, so seeing this
    during a simulation means a policy broke its contract.
    """


class PolicyContractError(EhcellError, RuntimeError):
    """A policy returned an action that is illegal in the current state."""


class ConfigError(EhcellError, ValueError):
    pass


class ScenarioError(EhcellError, ValueError):
    def __init__(self, message: str, period: int | None = None):
        self.period = period
        if period is not None:
            message = f"period {period}: {message}"
        super().__init__(message)


class OracleTooLarge(EhcellError, ValueError):
    pass


class PreconditionError(EhcellError, ValueError):
    pass


class IoError(EhcellError, OSError):
    def __init__(self, path, cause: BaseException | None = None):
        self.path = str(path)
        msg = f"cannot write {self.path}"
        if cause is not None:
            msg += f": {cause}"
        super().__init__(msg)
