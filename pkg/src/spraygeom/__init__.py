"""Numerical spray and Finsler geometry: connections, curvature, projective
deformations, holonomy obstruction and geodesics, all on coordinate charts."""

from . import autodiff, chart, geodesics, holonomy, models, projective, spray
from .chart import (ChartPoint, DomainError, HomogeneityError, PreconditionError,
                    RegularityError, sample_points)
from .models import FinslerModel, get_model
from .projective import ProjectiveFactor, deform
from .spray import SprayData, geodesic_spray

__all__ = [
    "autodiff", "chart", "geodesics", "holonomy", "models", "projective", "spray",
    "ChartPoint", "DomainError", "HomogeneityError", "PreconditionError", "RegularityError",
    "sample_points", "FinslerModel", "get_model", "ProjectiveFactor", "deform",
    "SprayData", "geodesic_spray",
]

__version__ = "0.1.0"
