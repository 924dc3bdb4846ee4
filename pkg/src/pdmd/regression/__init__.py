"""Online-phase regressors from parameter points to reduced coefficients."""

from .delaunay import Triangulation
from .regressors import (
    KINDS,
    CubicRegressor,
    GprRegressor,
    LinearRegressor,
    NearestRegressor,
    RbfRegressor,
    Regressor,
    evaluate,
    fit_regressor,
)

__all__ = [
    "KINDS", "Triangulation", "Regressor", "LinearRegressor", "NearestRegressor",
    "CubicRegressor", "RbfRegressor", "GprRegressor", "fit_regressor", "evaluate",
]
