"""Regularized finite element solver for -div(b(|u|)|grad u|^(p-2) grad u) = f / u^gamma."""
from .errors import (
    ConfigurationError,
    DomainError,
    NewtonDivergence,
    OutOfRegime,
    SingEllipticError,
    SingularJacobian,
)
from .grid import DiscreteField, Mesh, build_mesh, lebesgue_norm, sobolev_seminorm
from .model import OperatorSpec, ProblemSpec, SourceSpec

__version__ = "0.1.0"
