"""Numerical toolkit for the exterior isoperimetric problem outside a planar convex body."""

from .obstacle import (BoundaryPoint, ConvexBody, body_from_config, boundary_at, circle,
                       ellipse, fourier_body, global_quantities, perturbed_circle,
                       project_to_boundary, subarc_quantities)

__all__ = [
    "BoundaryPoint", "ConvexBody", "body_from_config", "boundary_at", "circle", "ellipse",
    "fourier_body", "global_quantities", "perturbed_circle", "project_to_boundary",
    "subarc_quantities",
]

__version__ = "0.1.0"
