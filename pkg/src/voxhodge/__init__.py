"""Discrete Hilbert complexes on voxel domains.

Builds the de Rham, first/second biharmonic, and elasticity complexes as
finite matrices on voxel grids, computes cohomology dimensions and Fredholm
indices of the associated block operators, constructs explicit harmonic
Dirichlet/Neumann basis fields, and cross-validates everything against
integer cubical homology.
"""

from voxhodge.linalg import RankTolerance
from voxhodge.complexes import OperatorTriple, WeightSpec, CohomologyReport

__all__ = ["RankTolerance", "OperatorTriple", "WeightSpec", "CohomologyReport"]

__version__ = "0.1.0"
