"""Canonical solutions of the dbar equation on planar domains and their products."""
from .kernel_calculus import IndexSet, e_kernel, e_kernel_derivative, index_sets
from .errors import (ClosednessError, ConfigError, DbarError, DomainError, NearBoundaryError,
                     PoisonedResultError, SingularityError, UnsupportedError)
from .forms import PolyForm, SampledForm, load_form
from .domain_geometry import PlanarDomain, ProductDomain, domain_from_config
from .planar_kernels import KernelContext, SolutionField, solve_planar_T
from .product_operator import (MollifierSpec, ProductOperator, Resolution, ibp_check, mollify, solve_K,
                      solve_K_many, solve_T)

__version__ = "0.1.0"

__all__ = [
    "ClosednessError", "ConfigError", "DbarError", "DomainError", "IndexSet", "KernelContext",
    "MollifierSpec", "NearBoundaryError", "PlanarDomain", "PoisonedResultError", "PolyForm",
    "ProductDomain", "ProductOperator", "Resolution", "SampledForm", "SingularityError",
    "SolutionField", "UnsupportedError", "domain_from_config", "e_kernel", "e_kernel_derivative",
    "ibp_check", "index_sets", "load_form", "mollify", "solve_K", "solve_K_many", "solve_T",
    "solve_planar_T",
]
