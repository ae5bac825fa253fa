"""Exception hierarchy shared by all modules."""


class HiddenDynamicsError(Exception):
    """Base class for every error raised by this package."""


class ExpressionError(HiddenDynamicsError):
    pass


class ParseError(ExpressionError, ValueError):
    """Malformed expression text.

    Attributes
    ----------
    position : int
        Zero-based character offset of the offending token.
    """

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnboundVariableError(ExpressionError, KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unbound variable {self.name!r}"


class DomainError(ExpressionError, ArithmeticError):
    """Evaluation left the domain of an operation (division by zero, ...)."""


class DerivativeError(ExpressionError):
    pass


class ModelError(HiddenDynamicsError, ValueError):
    """A system definition is inconsistent (dimensions, variables, ...)."""


class OffManifoldError(HiddenDynamicsError, ValueError):
    """A point expected on the switching manifold is not on it."""


class DegenerateGradientError(HiddenDynamicsError, ValueError):
    pass


class PreconditionError(HiddenDynamicsError, ValueError):
    pass


class IntegrationError(HiddenDynamicsError, RuntimeError):
    """Numerical failure during time integration.

    Attributes
    ----------
    t : float or None
        Time at which the failure occurred.
    state : ndarray or None
        State at the failure.
    """

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class HypothesisError(HiddenDynamicsError, ValueError):
    """A theorem hypothesis needed by a construction does not hold.

    Attributes
    ----------
    quantity : str
        Name of the offending quantity.
    values : list of float
        Sampled values of that quantity.
    """

    def __init__(self, message, quantity=None, values=None):
        super().__init__(message)
        self.quantity = quantity
        self.values = list(values) if values is not None else []


class ConfigError(HiddenDynamicsError, ValueError):
    pass
