"""Set-valued control functions: prediction sets, containment functionals,
identified regions and split-sample likelihood-ratio confidence intervals."""
from .cells import CellStats, Schema, estimate_cells, estimate_dynamic
from .containment import ContainmentTable, build_table, capacity, containment, event_class
from .dgp import DgpConfig, Dataset, SchoolConfig, population_cells, simulate, simulate_school
from .functionals import Functional, evaluate
from .grid import GridSpec, ParamArrays, default_grid
from .identify import (FunctionalBounds, IdentifiedRegion, RefutedError, artstein_check, aumann_check,
                       identified_region, intersection_bounds_mu, kappa_bounds, school_bounds)
from .inference import CiResult, GridLikelihood, confidence_interval, lfp_density
from .models import KINDS, make_model
from .theta import Cell, InfeasibleThetaError, ThetaPoint

__version__ = "0.1.0"

__all__ = [
    "CellStats",
    "Schema",
    "estimate_cells",
    "estimate_dynamic",
    "ContainmentTable",
    "build_table",
    "capacity",
    "containment",
    "event_class",
    "DgpConfig",
    "Dataset",
    "SchoolConfig",
    "population_cells",
    "simulate",
    "simulate_school",
    "Functional",
    "evaluate",
    "GridSpec",
    "ParamArrays",
    "default_grid",
    "FunctionalBounds",
    "IdentifiedRegion",
    "RefutedError",
    "artstein_check",
    "aumann_check",
    "identified_region",
    "intersection_bounds_mu",
    "kappa_bounds",
    "school_bounds",
    "CiResult",
    "GridLikelihood",
    "confidence_interval",
    "lfp_density",
    "KINDS",
    "make_model",
    "Cell",
    "InfeasibleThetaError",
    "ThetaPoint",
]
