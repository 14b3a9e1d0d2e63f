class SingEllipticError(Exception):
    pass


class ConfigurationError(SingEllipticError, ValueError):
    pass


class DomainError(SingEllipticError, ValueError):
    pass


class OutOfRegime(SingEllipticError, ValueError):
    pass


class NewtonDivergence(SingEllipticError, RuntimeError):
    def __init__(self, message, residual=float("nan"), n=None):
        super().__init__(message)
        self.residual = residual
        self.n = n


class SingularJacobian(SingEllipticError, RuntimeError):
    pass
