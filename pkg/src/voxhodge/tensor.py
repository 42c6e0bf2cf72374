"""Finite-difference discretizations of the hessian (bih1), deviatoric-
gradient (bih2) and elasticity complexes on voxel domains, alongside the
collocated de Rham complex.

The complex property is bit-exact by construction (commuting integer
difference matrices plus the algebraic identity catalogue).  Kernel and
cohomology dimensions are computed from Gram/Hodge-Laplacian spectra with
spectral-gap auditing and compared against the topological targets

    dim N0 = 0,   dim K1 = k (m-1),   dim K2 = k p,   dim N2* = k n,

with k = 1, 4, 4, 6 for derham, bih1, bih2, ela.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from voxhodge.complexes import CohomologyReport, InvariantViolation, OperatorTriple
from voxhodge.grid import (
    COMPONENTS, DomainTooThin, KINDS, MaskedComplex, backward_diffs,
    build_masked_complex, forward_diffs, full_operators, omega_nodes,
    structural_reach,
)
from voxhodge.linalg import (
    RankTolerance, kernel_dimension_with_gap, numerical_rank_with_gap,
)
from voxhodge.topology import TopologyInvariants, VoxelDomain, invariants

COHOM_FACTOR = {"derham": 1, "bih1": 4, "bih2": 4, "ela": 6}

# the operator whose kernel realizes N2* without boundary conditions:
# (building kind, input components, stencil extent per component unused)
_NOBC_KERNEL_OP = {
    "derham": ("derham", 1),  # grad
    "bih1": ("bih2", 3),      # 3*devGrad
    "bih2": ("bih1", 1),      # hessian
    "ela": ("ela", 3),        # 2*symGrad
}


def build_tensor_complex(dom: VoxelDomain, kind: str,
                         diff_family: str = "forward") -> MaskedComplex:
    """Boundary-condition complex of the requested kind (interior-based
    reach masking; adjoints are plain transposes)."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    mc = build_masked_complex(dom.voxels, kind, diff_family=diff_family)
    z1 = abs(mc.A1 @ mc.A0)
    z2 = abs(mc.A2 @ mc.A1)
    if (z1.nnz and z1.max() != 0) or (z2.nnz and z2.max() != 0):
        raise InvariantViolation("tensor complex property not bit-exact")
    return mc


def tensor_triple(mc: MaskedComplex, dom: VoxelDomain) -> OperatorTriple:
    return OperatorTriple(mc.A0, mc.A1, mc.A2,
                          label=f"{mc.kind}:{dom.label}")


def _dim_null_stack(mats, tol: RankTolerance, flags: list, what: str) -> int:
    stack = sp.vstack([sp.csr_matrix(m) for m in mats], format="csr")
    dim, audit = kernel_dimension_with_gap(stack, tol, context=what)
    if audit.ambiguous:
        flags.append(f"rank-ambiguous:{what}:gap={audit.ratio:.2e}")
    return dim


def masked_cohomology(mc: MaskedComplex, tol: RankTolerance = RankTolerance(),
                      lambda1: sp.spmatrix | None = None,
                      lambda2: sp.spmatrix | None = None) -> CohomologyReport:
    """Dimensions N0, K1, K2, N2* of a masked complex (optionally with sparse
    pointwise SPD weights; dimensions are weight-independent)."""
    A0, A1, A2 = mc.A0, mc.A1, mc.A2
    flags: list = []
    A0s_t = (A0.T @ lambda1).T if lambda1 is not None else A0   # (A0^T l1)^T
    A1s_t = (A1.T @ lambda2).T if lambda2 is not None else A1
    n0 = _dim_null_stack([A0], tol, flags, "N0")
    n2s = _dim_null_stack([A2.T], tol, flags, "N2star")
    k1 = _dim_null_stack([A1, A0s_t.T], tol, flags, "K1")
    k2 = _dim_null_stack([A2, A1s_t.T], tol, flags, "K2")
    idx = n0 - k1 + k2 - n2s
    return CohomologyReport(n0, k1, k2, n2s, idx, -idx, flags=flags,
                            label=mc.kind)


@dataclass
class TensorReport:
    """Cohomology of one tensor complex plus the topological target check."""

    kind: str
    report: CohomologyReport
    inv: TopologyInvariants
    matches_targets: bool
    targets: dict

    def as_dict(self):
        out = self.report.as_dict()
        out.update({"kind": self.kind, "matches_targets": self.matches_targets,
                    "targets": self.targets})
        return out


def tensor_cohomology(dom: VoxelDomain, kind: str,
                      tol: RankTolerance = RankTolerance()) -> TensorReport:
    mc = build_tensor_complex(dom, kind)
    rep = masked_cohomology(mc, tol)
    inv = invariants(dom)
    k = COHOM_FACTOR[kind]
    targets = {
        "dim_N0": 0,
        "dim_K1": k * (inv.m - 1),
        "dim_K2": k * inv.p,
        "dim_N2star": k * inv.n,
        "index_D": k * (inv.p - inv.m - inv.n + 1),
    }
    got = {kk: rep.as_dict()[kk] for kk in targets}
    return TensorReport(kind, rep, inv, matches_targets=(got == targets),
                        targets=targets)


def kernel_dims_no_bc(dom: VoxelDomain, kind: str,
                      tol: RankTolerance = RankTolerance()) -> int:
    """dim of the no-boundary-condition kernel:
    ker(grad) = n, ker(devGrad) = 4n, ker(hessian) = 4n, ker(symGrad) = 6n.

    Columns live on all domain nodes; a row is kept only if its full forward
    stencil stays on domain nodes, so no boundary condition sneaks in."""
    op_kind, cin = _NOBC_KERNEL_OP[kind]
    D = forward_diffs(dom.voxels)
    B = full_operators(D, op_kind)[0].tocsr()
    om = omega_nodes(dom.voxels).ravel()
    colmask = np.tile(om, cin)
    Babs = B.copy()
    Babs.data = np.abs(Babs.data)
    outside_hits = Babs @ (~colmask).astype(float)
    any_hits = Babs @ np.ones(B.shape[1])
    rowmask = (outside_hits == 0) & (any_hits > 0)
    if not rowmask.any():
        raise DomainTooThin(f"no complete interior stencil for {kind}")
    Br = B[rowmask][:, colmask]
    rank, audit = numerical_rank_with_gap(Br, tol, context=f"nobc:{kind}")
    dim = int(colmask.sum()) - rank
    if audit.ambiguous:
        raise InvariantViolation(
            f"no-bc kernel rank ambiguous for {kind}: gap {audit.ratio:.2e}")
    return dim


# ---------------------------------------------------------------------------
# refinement protocol
# ---------------------------------------------------------------------------

@dataclass
class RefinementResult:
    kind: str
    name: str
    resolutions: list
    history: list            # TensorReport per resolution
    stabilized: bool
    final: TensorReport | None

    @property
    def matches_targets(self) -> bool:
        return self.stabilized and self.final is not None and self.final.matches_targets


def refinement_protocol(domain_factory, kind: str, resolutions=(8, 12, 16),
                        tol: RankTolerance = RankTolerance(),
                        name: str = "") -> RefinementResult:
    """Compute cohomology at increasing resolutions; accept once the four
    dimensions agree at two consecutive resolutions."""
    history = []
    key = None
    for i, res in enumerate(resolutions):
        rep = tensor_cohomology(domain_factory(res), kind, tol)
        history.append(rep)
        new_key = tuple(rep.report.as_dict()[k]
                        for k in ("dim_N0", "dim_K1", "dim_K2", "dim_N2star"))
        if key is not None and new_key == key:
            return RefinementResult(kind, name, list(resolutions[:i + 1]),
                                    history, True, rep)
        key = new_key
    return RefinementResult(kind, name, list(resolutions), history, False, None)


# ---------------------------------------------------------------------------
# weight invariance
# ---------------------------------------------------------------------------

def pointwise_spd_weight(rng, mask: np.ndarray, ncomp: int,
                         diagonal: bool = False) -> sp.csr_matrix:
    """Random SPD block-diagonal weight on a masked component space: one
    c x c SPD block per node (restricted to masked entries)."""
    nn = mask.shape[0] // ncomp
    per_node = mask.reshape(ncomp, nn)
    if diagonal:
        d = np.ones(mask.shape[0])
        d[mask] = rng.uniform(0.5, 2.0, size=int(mask.sum()))
        W = sp.diags(d).tocsr()
        return W[mask][:, mask]
    B = rng.normal(size=(ncomp, ncomp)) / np.sqrt(ncomp)
    block = np.eye(ncomp) + B @ B.T
    rows, cols, vals = [], [], []
    # same block at every node keeps assembly cheap; variability comes from
    # fresh draws per trial
    offsets = np.cumsum(mask) - 1
    for i in range(ncomp):
        for j in range(ncomp):
            sel = per_node[i] & per_node[j]
            nodes = np.nonzero(sel)[0]
            rows.extend(offsets[i * nn + nodes])
            cols.extend(offsets[j * nn + nodes])
            vals.extend([block[i, j]] * len(nodes))
    d = int(mask.sum())
    W = sp.csr_matrix((vals, (rows, cols)), shape=(d, d))
    # nodes where only part of the block is masked keep the identity there
    diag = W.diagonal()
    missing = diag == 0
    if missing.any():
        W = W + sp.diags(missing.astype(float))
    return W


def weight_invariance(dom: VoxelDomain, kind: str, seed: int = 0,
                      trials: int = 5,
                      tol: RankTolerance = RankTolerance()) -> bool:
    """Dimensions and indices are unchanged under random SPD pointwise
    weights on H1 and H2 (exact integers, every trial)."""
    rng = np.random.default_rng(seed)
    mc = build_tensor_complex(dom, kind)
    base = masked_cohomology(mc, tol)
    comps = COMPONENTS[kind]
    for _ in range(trials):
        l1 = pointwise_spd_weight(rng, mc.masks[1], comps[1])
        l2 = pointwise_spd_weight(rng, mc.masks[2], comps[2])
        rep = masked_cohomology(mc, tol, lambda1=l1, lambda2=l2)
        same = (rep.dim_N0 == base.dim_N0 and rep.dim_K1 == base.dim_K1
                and rep.dim_K2 == base.dim_K2
                and rep.dim_N2star == base.dim_N2star
                and rep.index == base.index)
        if not same:
            return False
    return True
