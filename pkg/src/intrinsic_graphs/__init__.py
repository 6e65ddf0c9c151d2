"""Numerical toolkit for intrinsic graphs in the first Heisenberg group.

Area and its variations, characteristic (Lagrangian) flows, quadratic
rulings, a spectral stability test and integrability-exponent arithmetic.
"""

from .catalog import CatalogEntry, catalog_get, catalog_names
from .exponents import build_exponents, check_conditions, find_min_p
from .field import GraphFunction, GridSpec, ScalarField, build_graph_function, plane_fit
from .lagrangian import extract_ruling, integrate_flow, vandermonde_extract
from .stability import assemble_form, hardy_rayleigh, min_eigenvalue, stability_verdict
from .variation import TestFunction, area, first_variation, second_variation

__version__ = "0.1.0"

__all__ = [
    "CatalogEntry", "GraphFunction", "GridSpec", "ScalarField", "TestFunction",
    "area", "assemble_form", "build_exponents", "build_graph_function", "catalog_get",
    "catalog_names", "check_conditions", "extract_ruling", "find_min_p", "first_variation",
    "hardy_rayleigh", "integrate_flow", "min_eigenvalue", "plane_fit", "second_variation",
    "stability_verdict", "vandermonde_extract",
]
