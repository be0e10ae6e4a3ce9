"""Weyl manifolds with a semi-symmetric non-metric connection: curvature engine and identity checker."""

__version__ = "0.1.0"
