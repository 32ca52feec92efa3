"""Numerical Kobayashi geometry of convex domains: distances, geodesics, visibility and dynamics."""

__version__ = "0.1.0"
