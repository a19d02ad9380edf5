"""Band structures and edge conductances of magnetic barriers and guides."""

from .bands import AsymptoticLimits, BandTable, estimate_limits, spectrum_bands, sweep_bands
from .conductance import ConductanceResult, compute_conductance
from .fiber import SolverConfig, SpectrumSlice, solve_slice
from .perturbation import CompactFieldPerturbation, GapPersistenceSpec, apply_field_perturbation
from .profiles import FieldProfile, PotentialBeta, SwitchFunction, landau_gap, make_switch
from .scaling import InterfaceShape, estimate_c0, scaled_ground_energy

__all__ = [
    "AsymptoticLimits",
    "BandTable",
    "CompactFieldPerturbation",
    "ConductanceResult",
    "FieldProfile",
    "GapPersistenceSpec",
    "InterfaceShape",
    "PotentialBeta",
    "SolverConfig",
    "SpectrumSlice",
    "SwitchFunction",
    "apply_field_perturbation",
    "compute_conductance",
    "estimate_c0",
    "estimate_limits",
    "landau_gap",
    "make_switch",
    "scaled_ground_energy",
    "solve_slice",
    "spectrum_bands",
    "sweep_bands",
]
