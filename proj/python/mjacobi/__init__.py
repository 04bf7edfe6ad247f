"""Block Jacobi operators on the half-line: Weyl M-functions, truncated
solution norms and spectral multiplicity estimates."""

from ._mjacobi import (
    MJacobiError,
    Operator,
    cesaro,
    diagonal,
    floquet,
    free,
    jl_bounds,
    m_resolvent,
    m_riccati,
    periodic,
    random_periodic,
    scan,
    singular_values,
)

__all__ = [
    "MJacobiError",
    "Operator",
    "cesaro",
    "diagonal",
    "floquet",
    "free",
    "jl_bounds",
    "m_resolvent",
    "m_riccati",
    "periodic",
    "random_periodic",
    "scan",
    "singular_values",
]
