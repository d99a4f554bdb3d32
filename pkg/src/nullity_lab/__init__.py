"""Curvature nullity spaces of Finsler energies, computed in the Klein-Grifone formalism."""

__version__ = "0.1.0"

from .dsl import EnergyExpr, FieldSpec, parse_energy
from .geometry import ChartPoint, GeometryBundle, TensorField, compute_bundle

__all__ = [
    "ChartPoint",
    "EnergyExpr",
    "FieldSpec",
    "GeometryBundle",
    "TensorField",
    "compute_bundle",
    "parse_energy",
]
