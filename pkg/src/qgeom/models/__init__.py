"""Parameterized Hamiltonian families with analytic parameter derivatives."""
from .base import OBC, PBC, LatticeGeometry, NuclearFrame, Nucleus, ParameterizedModel, Units
from .continuum import ContinuumRing, build_continuum_ring
from .lattice import LatticeChain, build_interacting_ring, build_rice_mele, build_two_site_molecule
from .molecule import PlanarMolecule, build_planar_molecule, choose_basis_cut, default_frame
from .operators import PositionElements, position_matrix_elements
from .two_level import TwoLevel, build_two_level

__all__ = [
    "OBC", "PBC", "Units", "Nucleus", "NuclearFrame", "LatticeGeometry", "ParameterizedModel",
    "TwoLevel", "build_two_level", "LatticeChain", "build_rice_mele", "build_interacting_ring",
    "build_two_site_molecule", "ContinuumRing", "build_continuum_ring", "PlanarMolecule",
    "build_planar_molecule", "choose_basis_cut", "default_frame", "PositionElements", "position_matrix_elements",
]
