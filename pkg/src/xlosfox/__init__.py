"""Multivariate Fox H-functions by QMC contour integration, and XLOS service
probabilities of multi-tier Poisson cellular networks."""

__version__ = "0.1.0"
