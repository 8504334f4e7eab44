"""Densities, exact-transition simulation, tangent-process convergence studies
and free-probability transform identities for q-Ornstein-Uhlenbeck processes
and q-Brownian motions, q in (-1, 1).
"""

from .qspecial import QParams, TruncationPolicy

__version__ = "0.1.0"

__all__ = ["QParams", "TruncationPolicy", "__version__"]
