"""Copula conditional tail expectation (CCTE) for dependent bivariate losses."""

from .copulas import (
    ArchimedeanCopula,
    ArchimedeanGenerator,
    ClaytonCopula,
    CopulaModel,
    Family,
    FGMCopula,
    GumbelCopula,
    ProductCopula,
    clayton_generator,
    finite_tail_ratio_lower,
    finite_tail_ratio_upper,
    gumbel_generator,
    make_copula,
)
from .errors import (
    CcteError,
    DegenerateTailError,
    DomainError,
    IngestionError,
    InsufficientTailMassError,
    IntegrationError,
    NumericError,
    SamplerError,
    TailSampleWarning,
)
from .margins import EmpiricalMargin, ParetoMargin
from .quadrature import IntegrationResult, integrate, integrate_upper_singular
from .risk import (
    CcteResult,
    Method,
    RiskQuery,
    ccte,
    ccte_archimedean,
    ccte_fgm_closed,
    ccte_generic,
    ccte_inequality_report,
    ccte_upper_bound,
    cte_risk,
    var_risk,
)

__version__ = "0.1.0"

__all__ = [
    "ArchimedeanCopula", "ArchimedeanGenerator", "ClaytonCopula", "CopulaModel", "Family",
    "FGMCopula", "GumbelCopula", "ProductCopula", "clayton_generator", "gumbel_generator",
    "finite_tail_ratio_lower", "finite_tail_ratio_upper", "make_copula",
    "CcteError", "DegenerateTailError", "DomainError", "IngestionError",
    "InsufficientTailMassError", "IntegrationError", "NumericError", "SamplerError",
    "TailSampleWarning", "EmpiricalMargin", "ParetoMargin", "IntegrationResult",
    "integrate", "integrate_upper_singular", "CcteResult", "Method", "RiskQuery", "ccte",
    "ccte_archimedean", "ccte_fgm_closed", "ccte_generic", "ccte_inequality_report",
    "ccte_upper_bound", "cte_risk", "var_risk",
]
