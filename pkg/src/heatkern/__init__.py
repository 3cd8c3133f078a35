"""Heat kernels of elliptic pseudodifferential operators on the circle and torus."""
from .errors import (
    AccuracyError,
    ConfigError,
    ContourError,
    DomainError,
    EllipticityError,
    HeatKernError,
    TruncationError,
)
from .symbols import (
    ClassicalSymbol,
    HomogTerm,
    SymbolExpr,
    TrigPoly,
    compose_truncated,
    ellipticity_constant,
    excision,
    homog_diff_x,
    homog_diff_xi,
    trig_mul,
)
from .spectral import (
    KernelGrid,
    MultiplierSymbol,
    OperatorMatrix,
    build_matrix,
    derivative_kernel,
    dn_heat_kernel_closed,
    gamma_lower_bound,
    gaussian_fourier_kernel,
    gaussian_torus_kernel,
    heat_kernel_spectral,
    poisson_kernel_closed,
    semigroup_defect,
)
from .contour import ContourSpec, heat_kernel_contour, make_contour
from .parametrix import (
    heat_symbol_term,
    parametrix_residual,
    remainder_kernel,
    resolvent_terms,
    term_kernel,
)
from .subordination import eta_d1, eta_general, heat_kernel_subordination, subordinated_kernel

__version__ = "0.1.0"
