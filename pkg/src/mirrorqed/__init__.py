"""Linearized transmon in front of a mirror: delay models, analytic series and a lattice oracle."""

from .params import (
    CircuitParams,
    DerivedQuantities,
    DimensionlessSpec,
    Placement,
    build_params,
    dark_state_energy_ratio,
    delay_for_placement,
    derive,
)
from .trajectory import Trajectory

__all__ = [
    "CircuitParams",
    "DerivedQuantities",
    "DimensionlessSpec",
    "Placement",
    "Trajectory",
    "build_params",
    "dark_state_energy_ratio",
    "delay_for_placement",
    "derive",
]
