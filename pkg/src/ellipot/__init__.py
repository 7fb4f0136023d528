"""Weighted potential theory on genus-one Riemann surfaces."""

from .elliptic import Lattice, TorusPoint, EllipticCurve, CurvePoint, theta1, theta1_logderiv

__all__ = ["Lattice", "TorusPoint", "EllipticCurve", "CurvePoint", "theta1", "theta1_logderiv"]

__version__ = "0.1.0"
