"""
Convex surfaces in hyperbolic space and their de Sitter duals.
"""

from .config import Settings
from .deform import DeformField, RigidityOperator, rigidity_kernel
from .dual import DualSurface, admissibility_I, admissibility_III, dualize
from .errors import HypConvexError
from .flows import OffsetParams, mixed_form, offset_surface
from .geodesics import shortest_closed_geodesic
from .grid import SphereGrid
from .realize import MetricRealizer, gauge_align, realize_metric, realize_third_form
from .reports import Report
from .surface import FormField, RadialSurface, SurfaceForms, fundamental_forms

__all__ = [
    "Settings",
    "DeformField",
    "RigidityOperator",
    "rigidity_kernel",
    "DualSurface",
    "admissibility_I",
    "admissibility_III",
    "dualize",
    "HypConvexError",
    "OffsetParams",
    "mixed_form",
    "offset_surface",
    "shortest_closed_geodesic",
    "SphereGrid",
    "MetricRealizer",
    "gauge_align",
    "realize_metric",
    "realize_third_form",
    "Report",
    "FormField",
    "RadialSurface",
    "SurfaceForms",
    "fundamental_forms",
]
