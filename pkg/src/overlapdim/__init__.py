"""Hausdorff dimension of self-similar measures with overlaps.

The IFS is {alpha x, beta x, gamma x + 1 - gamma} on [0, 1]. The first
two maps commute, which is the only source of exact overlap.
"""

__version__ = "0.1.0"

from .dim_formulas import (  # noqa: E402
    measure_dimension,
    overlap_dimension,
    phi_series,
    similarity_dimension,
    subsystem_dimension,
)
from .ifs_core import IfsParams, Interval, ProbVector  # noqa: E402
from .separation import Status, check_forward_separation  # noqa: E402

__all__ = [
    "IfsParams",
    "Interval",
    "ProbVector",
    "Status",
    "check_forward_separation",
    "measure_dimension",
    "overlap_dimension",
    "phi_series",
    "similarity_dimension",
    "subsystem_dimension",
]
