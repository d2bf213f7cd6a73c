"""Outliers of low-rank perturbations of inhomogeneous elliptic random matrices.

Modules
-------
ensemble
    Graph-structured elliptic ensembles and seeded sampling.
geometry
    The elliptic regions E_rho and their epsilon-neighbourhoods.
dyson
    Solver for the 2x2 matrix Dyson equation and its support classification.
spectral
    Eigenvalues, hermitization, minimal singular values and resolvents.
outliers
    Low-rank perturbations, outlier predictions, determinant criteria and matching.
products
    Products of independent ensembles via block-cyclic linearization.
harness
    Reproducible parallel Monte Carlo experiments (also exposed as ``ellout``).
"""
from .dyson import DysonConvergenceError, DysonParams, DysonSolution, classify_support, limit_b, solve
from .ensemble import EntryModel, EnsembleSpec, GraphSpec, build_graph, diagnostics, sample_matrix
from .estimators import EnsembleSampler, HermitizationTransformer, OutlierLocator
from .geometry import EllipticRegion
from .harness import ConfigError, ExperimentConfig, run, summarize
from .outliers import (ForbiddenAnnulusError, OutlierReport, Perturbation, RankError, factor,
                       criterion_roots, locate_roots, match, outlier_report, predict)
from .products import ProductSpec, linearize, product_outlier_experiment
from .spectral import NearSingularError, eigenvalues, hermitize, resolvent_bilinear, sigma_min

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DysonConvergenceError", "DysonParams", "DysonSolution", "EllipticRegion",
    "EnsembleSampler", "EnsembleSpec", "EntryModel", "ExperimentConfig", "ForbiddenAnnulusError",
    "GraphSpec", "HermitizationTransformer", "NearSingularError", "OutlierLocator",
    "OutlierReport", "Perturbation", "ProductSpec", "RankError", "build_graph",
    "classify_support", "diagnostics", "eigenvalues", "factor", "hermitize", "limit_b",
    "criterion_roots", "linearize", "locate_roots", "match", "outlier_report", "predict",
    "product_outlier_experiment", "resolvent_bilinear", "run", "sample_matrix", "sigma_min",
    "solve", "summarize",
]
