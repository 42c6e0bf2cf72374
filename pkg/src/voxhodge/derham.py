"""Discrete de Rham complexes (grad, curl, div) on the cubical complex.

The homogeneous-boundary ("Dirichlet") variant is the relative cochain
complex: cochains supported on cells whose open interior lies in the open
domain, realizing extension by zero.  Its transposes are the operators
without boundary conditions, so one set of matrices carries the whole block
operator.  Cohomology dimensions are then exact integers: dim(harmonic
Dirichlet fields) = m - 1 and dim(harmonic Neumann fields) = p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from voxhodge.complexes import (
    CohomologyReport, InvariantViolation, OperatorTriple, cohomology,
)
from voxhodge.grid import MaskedComplex, forward_diffs, full_operators
from voxhodge.linalg import RankTolerance, intersect_nullspaces
from voxhodge.topology import (
    CubicalComplex, TopologyInvariants, VoxelDomain, build_complex, invariants,
)


@dataclass
class DerhamComplex:
    """Cubical de Rham complex of a domain, with or without the boundary
    condition, plus the topological invariants used for cross-checks."""

    dom: VoxelDomain
    cx: CubicalComplex
    triple: OperatorTriple
    inv: TopologyInvariants
    bc: str

    @property
    def masks(self):
        return tuple(np.concatenate(m) for m in self.cx.cell_masks)


def build_derham(dom: VoxelDomain, bc: str = "dirichlet") -> DerhamComplex:
    """Operator triple (grad, curl, div) as cubical coboundaries.

    bc='dirichlet': relative complex (zero extension); transposes realize the
    no-boundary-condition adjoints.  bc='none': absolute complex.
    """
    if bc not in ("dirichlet", "none"):
        raise ValueError("bc must be 'dirichlet' or 'none'")
    cx = build_complex(dom, relative=(bc == "dirichlet"))
    G, C, D = cx.coboundary
    triple = OperatorTriple(G, C, D, label=f"derham[{bc}]:{dom.label}")
    z1 = abs(C @ G)
    z2 = abs(D @ C)
    if (z1.nnz and z1.max() != 0) or (z2.nnz and z2.max() != 0):
        raise InvariantViolation("complex property not exact")
    return DerhamComplex(dom, cx, triple, invariants(dom), bc)


def as_masked_complex(dc: DerhamComplex) -> MaskedComplex:
    """The same matrices in the collocated (node-anchored component) view."""
    return MaskedComplex("derham", dc.dom.voxels, dc.triple.A0, dc.triple.A1,
                         dc.triple.A2, tuple(np.concatenate(m) for m in dc.cx.cell_masks),
                         (1, 1, 1))


def harmonic_dirichlet_fields(dc: DerhamComplex,
                              tol: RankTolerance = RankTolerance()) -> np.ndarray:
    """Orthonormal basis of ker(curl_0) ∩ ker(div) as edge cochains;
    cardinality m - 1."""
    if dc.bc != "dirichlet":
        raise ValueError("needs the Dirichlet complex")
    B = intersect_nullspaces(dc.triple.A1, dc.triple.A0.T, tol)
    if B.shape[1] != dc.inv.m - 1:
        raise InvariantViolation(
            f"dim harmonic Dirichlet fields = {B.shape[1]}, expected m-1 = "
            f"{dc.inv.m - 1}")
    return B


def harmonic_neumann_fields(dc: DerhamComplex,
                            tol: RankTolerance = RankTolerance()) -> np.ndarray:
    """Orthonormal basis of ker(div_0) ∩ ker(curl) as face cochains;
    cardinality p."""
    if dc.bc != "dirichlet":
        raise ValueError("needs the Dirichlet complex")
    B = intersect_nullspaces(dc.triple.A2, dc.triple.A1.T, tol)
    if B.shape[1] != dc.inv.p:
        raise InvariantViolation(
            f"dim harmonic Neumann fields = {B.shape[1]}, expected p = {dc.inv.p}")
    return B


def derham_index(dom: VoxelDomain,
                 tol: RankTolerance = RankTolerance()) -> CohomologyReport:
    """Full cohomology report; the index equals p - m - n + 1 exactly."""
    dc = build_derham(dom, bc="dirichlet")
    rep = cohomology(dc.triple, tol=tol)
    n, m, p = dc.inv.n, dc.inv.m, dc.inv.p
    expected = p - m - n + 1
    if rep.index != expected:
        raise InvariantViolation(
            f"de Rham index {rep.index} != p-m-n+1 = {expected}")
    return rep


def extended_maxwell(dom: VoxelDomain) -> tuple[sp.csr_matrix, dict]:
    """The skew block operator [[0, D],[-D^T, 0]] built from the de Rham
    block operator; returns the matrix and a small report.

    dim ker = n + m + p - 1 and the index is 0.
    """
    dc = build_derham(dom, bc="dirichlet")
    A0, A1, A2 = dc.triple.A0, dc.triple.A1, dc.triple.A2
    d0, d1, d2, d3 = dc.triple.dims
    Z = sp.csr_matrix((d3, d0))
    D = sp.bmat([[A2, Z], [A1.T, A0]], format="csr")
    nD, mD = D.shape
    M = sp.bmat([[None, D], [-D.T, None]], format="csr")
    anti = abs(M + M.T)
    info = {
        "antisymmetry_residual": float(anti.max()) if anti.nnz else 0.0,
        "dim_ker_expected": dc.inv.n + dc.inv.m + dc.inv.p - 1,
        "shape": M.shape,
        "split": nD,  # codomain rows of D come first
    }
    return M, info


# ---------------------------------------------------------------------------
# PDE-style solves for the basis potentials
# ---------------------------------------------------------------------------

def _node_mask(dc: DerhamComplex, which: str) -> np.ndarray:
    return dc.cx.cell_masks[0][0] if which == "interior" else None


def solve_dirichlet_laplace(dc: DerhamComplex, cavity_index: int):
    """Harmonic potential u with u = 1 on nodes adjacent to cavity
    ``cavity_index`` (1-based) and u = 0 near the other boundary parts.

    Returns (u on all box nodes, gradient as an edge cochain in H1).
    Deferred import: the multiplier/projection machinery lives in
    :mod:`voxhodge.basisfields`.
    """
    from voxhodge.basisfields import dirichlet_potential
    return dirichlet_potential(dc, cavity_index)


def solve_neumann_laplace(dc: DerhamComplex, cut_index: int):
    """Least-squares potential for the cut field of handle ``cut_index``
    (1-based): returns (psi, projected cut field in H2)."""
    from voxhodge.basisfields import neumann_potential
    return neumann_potential(dc, cut_index)
