"""Explicit harmonic Dirichlet and Neumann basis fields on the grid.

Dirichlet fields: for each bounded complement component (cavity) and each
polynomial multiplier, apply the boundary-condition operator A0 to a cavity
indicator profile times the multiplier, then project out ran(A0) by least
squares.  The result lies in K1 = ker A1 ∩ ker A0^T; counts are k(m-1).

Neumann fields: for each handle, build a two-sided cut potential theta (0 on
one side of the cut, 1 on the other, ramping back to 0 around the handle),
multiply by the kernel-polynomial family, apply A2^T with the cut slab zeroed
(extension by zero across the cut), and project out ran(A2^T) with the
analytic kernel fields as gauge.  The result lies in K2 = ker A2 ∩ ker A1^T;
counts are k p.

Independence of the Neumann sets is certified by functional matrices: the
monodromy of a discrete potential recovery along generator loops reproduces,
exactly, the closed-form jump coefficients (a delta pattern plus anchor
terms), because every step of the recovery is a telescoping identity of the
commuting difference calculus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from voxhodge.grid import (
    COMPONENTS, MaskedComplex, interior_nodes, node_shape, omega_nodes,
)
from voxhodge.linalg import RankTolerance, nullspace_basis
from voxhodge.tensor import build_tensor_complex
from voxhodge.topology import (
    CubicalComplex, HandleSystem, InvariantViolation, PlaneCut, VoxelDomain,
    build_complex, complement_components, domain_components, handle_system,
    invariants,
)


class GeometryError(Exception):
    """Collar/cut construction impossible on this voxel geometry."""


# ---------------------------------------------------------------------------
# polynomial multiplier families
# ---------------------------------------------------------------------------

def _rt_fields():
    """Raviart-Thomas family: x, e1, e2, e3 (vector valued)."""
    return ([lambda x: np.asarray(x, dtype=float)] +
            [lambda x, k=k: np.eye(3)[k] for k in range(3)])


def _p1_fields():
    """Affine family: 1, x1, x2, x3 (scalar valued)."""
    return ([lambda x: 1.0] +
            [lambda x, k=k: float(x[k]) for k in range(3)])


def _rm_fields():
    """Rigid motion family: e_k x x (k=1..3), then e_k (k=1..3)."""
    outs = []
    for k in range(3):
        outs.append(lambda x, k=k: np.cross(np.eye(3)[k], np.asarray(x, dtype=float)))
    for k in range(3):
        outs.append(lambda x, k=k: np.eye(3)[k])
    return outs


def _const_field():
    return [lambda x: 1.0]


DIRICHLET_MULTIPLIERS = {
    "derham": _const_field,   # scalar H0
    "bih1": _p1_fields,       # scalar H0, multipliers 1, x_k
    "bih2": _rt_fields,       # vector H0, multipliers x, e_k
    "ela": _rm_fields,        # vector H0, rigid motions
}
NEUMANN_MULTIPLIERS = {
    "derham": _const_field,   # scalar H3
    "bih1": _rt_fields,       # vector H3, Raviart-Thomas
    "bih2": _p1_fields,       # scalar H3, affine
    "ela": _rm_fields,        # vector H3, rigid motions
}


def _sample_family(family, shape, scalar: bool) -> np.ndarray:
    """Sample each family member on all grid nodes; returns
    (len(family), ncomp, #nodes)."""
    nodes = np.stack(np.meshgrid(*[np.arange(s) for s in shape],
                                 indexing="ij"), axis=-1).reshape(-1, 3)
    out = []
    for f in family:
        if scalar:
            vals = np.array([f(x) for x in nodes], dtype=float)[None, :]
        else:
            vals = np.array([f(x) for x in nodes], dtype=float).T
        out.append(vals)
    return np.array(out)


# ---------------------------------------------------------------------------
# node profiles
# ---------------------------------------------------------------------------

def _node_graph_distances(F: np.ndarray, seeds: np.ndarray,
                          allowed: np.ndarray,
                          blocked_edges: set | None = None) -> np.ndarray:
    """BFS distance over the node grid restricted to ``allowed`` nodes,
    optionally skipping blocked (frozenset pair) edges.  Unreached = +inf."""
    shape = node_shape(F)
    dist = np.full(shape, np.inf)
    queue = []
    for s in seeds:
        s = tuple(int(v) for v in s)
        if allowed[s] and dist[s] == np.inf:
            dist[s] = 0.0
            queue.append(s)
    head = 0
    offs = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    while head < len(queue):
        x = queue[head]
        head += 1
        for o in offs:
            y = (x[0] + o[0], x[1] + o[1], x[2] + o[2])
            if not all(0 <= y[i] < shape[i] for i in range(3)):
                continue
            if not allowed[y] or dist[y] != np.inf:
                continue
            if blocked_edges and frozenset((x, y)) in blocked_edges:
                continue
            dist[y] = dist[x] + 1
            queue.append(y)
    return dist


def cavity_profile(dom: VoxelDomain, cavity_label: int) -> np.ndarray:
    """Node weights: 1 at nodes on the wall of the chosen cavity, 0 at nodes
    near every other boundary part, interpolated in between."""
    F = dom.voxels
    shape = node_shape(F)
    labels, count = complement_components(dom)
    if cavity_label < 1 or cavity_label > count:
        raise GeometryError(f"no complement component {cavity_label}")
    omega = omega_nodes(F)

    def nodes_touching(vox_mask):
        M = np.zeros(shape, dtype=bool)
        for dx in (0, 1):
            for dy in (0, 1):
                for dz in (0, 1):
                    M[dx:dx + F.shape[0], dy:dy + F.shape[1], dz:dz + F.shape[2]] |= vox_mask
        return M

    cav_nodes = nodes_touching(labels == cavity_label) & omega
    other_nodes = nodes_touching((labels > 0) & (labels != cavity_label)) & omega
    if not cav_nodes.any():
        raise GeometryError("cavity has no adjacent domain nodes")
    d_cav = _node_graph_distances(F, np.argwhere(cav_nodes), omega)
    d_oth = _node_graph_distances(F, np.argwhere(other_nodes), omega)
    w = np.zeros(shape)
    both = np.isfinite(d_cav) & np.isfinite(d_oth)
    w[both] = d_oth[both] / (d_cav[both] + d_oth[both])
    w[np.isfinite(d_cav) & ~np.isfinite(d_oth)] = 1.0
    return w


@dataclass
class CutCollar:
    """Two-sided potential around a plane cut plus the zeroing slab."""

    cut: PlaneCut
    theta: np.ndarray          # node function (full grid)
    slab: np.ndarray           # bool on nodes: anchors whose components get zeroed
    x0: tuple                  # anchor on the theta=0 side (crossing edge tail)
    x1: tuple                  # anchor on the theta=1 side (crossing edge head)

    def slab_on_slot(self, mc: MaskedComplex, slot: int) -> np.ndarray:
        ncomp = mc.masks[slot].shape[0] // self.slab.size
        return np.tile(self.slab.ravel(), ncomp)[mc.masks[slot]]


def cut_collar(dom: VoxelDomain, cut: PlaneCut, collar: int = 5,
               ramp: int = 3, pad: int = 2) -> CutCollar:
    """theta = 1 within ``collar`` steps of the cut on the head side, ramping
    to 0 over ``ramp`` further steps; 0 elsewhere (in particular on the whole
    tail side, reached only around the handle).

    ``pad`` sizes the zeroing slab around the cut plane; ``collar`` must
    dominate pad + stencil reach so that everything the slab's neighborhood
    sees is locally a kernel polynomial (theta constant per side)."""
    F = dom.voxels
    shape = node_shape(F)
    omega = omega_nodes(F)
    heads = cut.anchors.copy()
    heads[:, cut.axis] += 1
    blocked = {frozenset((tuple(a), tuple(h)))
               for a, h in zip(map(tuple, cut.anchors), map(tuple, heads))}
    dist = _node_graph_distances(F, heads, omega, blocked_edges=blocked)
    theta = np.clip((collar + ramp - dist) / ramp, 0.0, 1.0)
    theta[~np.isfinite(dist)] = 0.0
    # the tail side must only be reachable the long way around the handle
    for a in map(tuple, cut.anchors):
        if np.isfinite(dist[a]) and dist[a] <= collar + ramp:
            raise GeometryError(
                "cut collar wraps around the handle; increase resolution")
    # zeroing slab: anchors whose stencils can straddle the cut plane
    slab = np.zeros(shape, dtype=bool)
    lo = np.maximum(cut.anchors.min(axis=0) - pad, 0)
    hi = np.minimum(cut.anchors.max(axis=0) + pad, np.array(shape) - 1)
    lo[cut.axis] = max(cut.layer - pad, 0)
    hi[cut.axis] = min(cut.layer + 1 + pad, shape[cut.axis] - 1)
    slab[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1] = True
    a0 = tuple(int(v) for v in cut.anchors[0])
    a1 = tuple(int(v) for v in heads[0])
    return CutCollar(cut, theta, slab, a0, a1)


# ---------------------------------------------------------------------------
# basis container
# ---------------------------------------------------------------------------

@dataclass
class BasisSet:
    kind: str
    side: str                      # "dirichlet" | "neumann"
    fields: np.ndarray             # (dim H, count)
    gram: np.ndarray
    functional_matrix: np.ndarray | None
    functional_expected: np.ndarray | None
    residuals: dict
    anchors: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.fields.shape[1]

    def gram_condition(self) -> float:
        if self.count == 0:
            return 1.0
        ev = np.linalg.eigvalsh(self.gram)
        return float(ev[-1] / max(ev[0], 1e-300))


def independence_check(basis: BasisSet, tol: float = 1e-6) -> bool:
    """Full Gram rank; for Neumann sets also a nonsingular functional matrix
    matching the closed-form structure."""
    if basis.count == 0:
        return True
    ev = np.linalg.eigvalsh(basis.gram)
    ok = ev[0] > tol * max(ev[-1], 1e-300)
    if basis.functional_matrix is not None and basis.functional_matrix.size:
        B = basis.functional_matrix
        ok = ok and abs(np.linalg.det(B)) > 1e-8
        if basis.functional_expected is not None:
            ok = ok and np.allclose(B, basis.functional_expected, atol=tol)
    return bool(ok)


def span_equality_check(B1: np.ndarray, B2: np.ndarray,
                        tol: float = 1e-6) -> bool:
    """Mutual least-squares projection residuals; True iff same span."""
    if B1.shape[1] != B2.shape[1]:
        return False
    if B1.shape[1] == 0:
        return True
    Q1, _ = np.linalg.qr(B1)
    Q2, _ = np.linalg.qr(B2)
    r12 = np.linalg.norm(B2 - Q1 @ (Q1.T @ B2)) / max(np.linalg.norm(B2), 1e-300)
    r21 = np.linalg.norm(B1 - Q2 @ (Q2.T @ B1)) / max(np.linalg.norm(B1), 1e-300)
    return bool(max(r12, r21) <= tol)


# ---------------------------------------------------------------------------
# Dirichlet side
# ---------------------------------------------------------------------------

def _spd_solver(G: sp.spmatrix):
    return spla.splu(G.tocsc())


def dirichlet_basis(dom: VoxelDomain, kind: str,
                    tol: RankTolerance = RankTolerance(),
                    mc: MaskedComplex | None = None) -> BasisSet:
    """k(m-1) fields in K1, one per (cavity, multiplier)."""
    if mc is None:
        mc = build_tensor_complex(dom, kind)
    F = dom.voxels
    shape = node_shape(F)
    nn = int(np.prod(shape))
    c0 = COMPONENTS[kind][0]
    scalar = c0 == 1
    family = DIRICHLET_MULTIPLIERS[kind]()
    samples = _sample_family(family, shape, scalar)   # (nf, c0, nn)
    _, mcount = complement_components(dom)
    cavities = list(range(2, mcount + 1))  # label 1 = unbounded component
    A0, A1 = mc.A0, mc.A1
    m0, m1 = mc.masks[0], mc.masks[1]
    fields = []
    anchors = []
    if cavities:
        lu = _spd_solver((A0.T @ A0).tocsc())
    for cav in cavities:
        prof = cavity_profile(dom, cav).ravel()
        for fi in range(len(family)):
            v_full = (samples[fi] * prof[None, :]).reshape(-1)  # c0*nn layout
            v = v_full[m0]
            theta = A0 @ v
            # membership in ker A1 holds by the complex property; evaluated in
            # two matrix-vector steps it is float-roundoff small, not bit zero
            z = A1 @ theta
            scale = max(np.abs(theta).max(), 1e-300)
            if z.size and np.abs(z).max() > 1e-11 * scale:
                raise InvariantViolation("Dirichlet candidate left ker A1")
            psi = lu.solve(A0.T @ theta)
            pi = theta - A0 @ psi
            fields.append(pi)
            anchors.append((cav, fi))
    B = np.array(fields).T if fields else np.zeros((int(m1.sum()), 0))
    res = _membership_residuals(mc, B, side="dirichlet")
    return BasisSet(kind, "dirichlet", B, B.T @ B, None, None, res, anchors)


def _membership_residuals(mc: MaskedComplex, B: np.ndarray, side: str) -> dict:
    if B.shape[1] == 0:
        return {"in_kernel": 0.0, "coexact": 0.0}
    scale = max(np.linalg.norm(B), 1e-300)
    if side == "dirichlet":
        r1 = np.linalg.norm(mc.A1 @ B) / scale
        r2 = np.linalg.norm(mc.A0.T @ B) / scale
    else:
        r1 = np.linalg.norm(mc.A1.T @ B) / scale
        r2 = np.linalg.norm(mc.A2 @ B) / scale
    return {"in_kernel": float(r1), "coexact": float(r2)}


# ---------------------------------------------------------------------------
# Neumann side
# ---------------------------------------------------------------------------

def _kernel_gauge(dom: VoxelDomain, kind: str, mask3: np.ndarray) -> np.ndarray:
    """Analytic basis of ker(A2^T): the polynomial family per connected
    component of the domain, sampled on the H3 mask."""
    F = dom.voxels
    shape = node_shape(F)
    nn = int(np.prod(shape))
    c3 = COMPONENTS[kind][3]
    scalar = c3 == 1
    family = NEUMANN_MULTIPLIERS[kind]()
    samples = _sample_family(family, shape, scalar)  # (nf, c3, nn)
    labels, ncomp = domain_components(dom)
    # node -> component label via any incident filled voxel
    node_label = np.zeros(shape, dtype=int)
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                T = np.zeros(shape, dtype=int)
                T[dx:dx + F.shape[0], dy:dy + F.shape[1], dz:dz + F.shape[2]] = labels
                node_label = np.maximum(node_label, T)
    cols = []
    for comp in range(1, ncomp + 1):
        sel = (node_label == comp).ravel()
        for fi in range(len(family)):
            v = (samples[fi] * sel[None, :]).reshape(-1)
            cols.append(v[mask3])
    K = np.array(cols).T
    return K


def _deep_loop(dom: VoxelDomain, collar_obj: CutCollar, depth_mask: np.ndarray):
    """Closed node loop crossing the cut exactly once: shortest path from the
    head anchor around the handle to the tail anchor, plus the crossing edge."""
    F = dom.voxels
    shape = node_shape(F)
    cut = collar_obj.cut
    heads = cut.anchors.copy()
    heads[:, cut.axis] += 1
    blocked = {frozenset((tuple(a), tuple(h)))
               for a, h in zip(map(tuple, cut.anchors), map(tuple, heads))}
    # BFS from all deep head-side nodes to reach the matching tail
    allowed = depth_mask
    # pick a crossing edge whose both endpoints are deep
    pair = None
    for a, h in zip(map(tuple, cut.anchors), map(tuple, heads)):
        if allowed[a] and allowed[h]:
            pair = (a, h)
            break
    if pair is None:
        raise GeometryError("no deep crossing edge; increase resolution")
    x0, x1 = pair  # tail (theta=0), head (theta=1)
    dist = _node_graph_distances(F, np.array([x1]), allowed, blocked_edges=blocked)
    if not np.isfinite(dist[x0]):
        raise GeometryError("loop around handle not found in the deep graph")
    # walk back from x0 to x1 along decreasing distance
    path = [x0]
    offs = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    while dist[path[-1]] > 0:
        x = path[-1]
        for o in offs:
            y = (x[0] + o[0], x[1] + o[1], x[2] + o[2])
            if all(0 <= y[i] < shape[i] for i in range(3)) and \
                    np.isfinite(dist[y]) and dist[y] == dist[x] - 1 and \
                    frozenset((x, y)) not in blocked:
                path.append(y)
                break
        else:
            raise GeometryError("loop walk failed")
    # path runs x0 -> x1 around the handle; the monodromy closes it with the
    # crossing edge x1 -> x0, so the loop base (= state anchor) is x0
    return path, x0, x1


def neumann_basis(dom: VoxelDomain, kind: str,
                  tol: RankTolerance = RankTolerance(),
                  mc: MaskedComplex | None = None,
                  collar: int = 5, ramp: int = 3) -> BasisSet:
    """k*p fields in K2, one per (handle, multiplier), with the functional
    matrix certified against the closed-form jump coefficients."""
    if mc is None:
        mc = build_tensor_complex(dom, kind)
    F = dom.voxels
    shape = node_shape(F)
    nn = int(np.prod(shape))
    inv = invariants(dom)
    p = inv.p
    c2, c3 = COMPONENTS[kind][2], COMPONENTS[kind][3]
    m2, m3 = mc.masks[2], mc.masks[3]
    if p == 0:
        Z = np.zeros((int(m2.sum()), 0))
        return BasisSet(kind, "neumann", Z, Z.T @ Z, np.zeros((0, 0)),
                        np.zeros((0, 0)), {"in_kernel": 0.0, "coexact": 0.0})
    cx = build_complex(dom)
    hs = handle_system(cx, p)
    scalar3 = c3 == 1
    family = NEUMANN_MULTIPLIERS[kind]()
    samples = _sample_family(family, shape, scalar3)
    A1, A2 = mc.A1, mc.A2
    # gauge-augmented normal equations for min ||A2^T psi - Theta||
    K = _kernel_gauge(dom, kind, m3)
    G = (A2 @ A2.T).tocsr()
    n3 = G.shape[0]
    S = sp.bmat([[G, sp.csr_matrix(K)],
                 [sp.csr_matrix(K.T), None]], format="csc")
    lu = spla.splu(S)

    collars = [cut_collar(dom, cut, collar=collar, ramp=ramp) for cut in hs.cuts]
    # component zeroing marks per collar, expanded over H2 components
    fields, anchors = [], []
    for cc in collars:
        slab2 = cc.slab_on_slot(mc, 2)
        theta_flat = cc.theta.ravel()
        for fi in range(len(family)):
            w_full = (samples[fi] * theta_flat[None, :]).reshape(-1)
            w = w_full[m3]
            Theta = A2.T @ w
            Theta = np.where(slab2, 0.0, Theta)
            z = A1.T @ Theta
            if z.size and np.abs(z).max() > 1e-9 * max(np.abs(Theta).max(), 1e-300):
                raise GeometryError(
                    f"cut field left ker A1^T (residual {np.abs(z).max():.2e}); "
                    "collar too small for the stencils")
            rhs = np.concatenate([A2 @ Theta, np.zeros(K.shape[1])])
            sol = lu.solve(rhs)
            psi = sol[:n3]
            pi = Theta - A2.T @ psi
            fields.append(pi)
            anchors.append((cc, fi))
    B = np.array(fields).T
    res = _membership_residuals(mc, B, side="neumann")

    # functional matrix via loop monodromy
    deep = interior_nodes(F)
    beta, expected = _functional_matrix(dom, kind, mc, B, collars, deep, family)
    return BasisSet(kind, "neumann", B, B.T @ B, beta, expected, res,
                    anchors)


# ---------------------------------------------------------------------------
# functional matrices: discrete potential recovery along loops
# ---------------------------------------------------------------------------

def _comp_arrays(mc: MaskedComplex, vec: np.ndarray, slot: int,
                 shape) -> list[np.ndarray]:
    """Embed a masked slot vector into per-component full-grid arrays."""
    mask = mc.masks[slot]
    nn = int(np.prod(shape))
    ncomp = mask.shape[0] // nn
    full = np.zeros(mask.shape[0])
    full[mask] = vec
    return [full[c * nn:(c + 1) * nn].reshape(shape) for c in range(ncomp)]


def _bdiff(A: np.ndarray, x, i: int) -> float:
    """backward difference A(x) - A(x - e_i), zero outside."""
    y = list(x)
    y[i] -= 1
    back = A[tuple(y)] if y[i] >= 0 else 0.0
    return A[x] - back


def _recover_monodromy(kind: str, comps: list[np.ndarray], loop: list) -> np.ndarray:
    """Traverse the closed loop accumulating the jump functionals.

    Returns [aux..., w...] per kind; zero anchors at the start node.  Every
    increment is an exact telescoping identity of the backward difference
    calculus applied to fields of the form A2^T(theta * rho)."""
    if kind == "derham":
        u = 0.0
        for a, b in zip(loop, loop[1:] + loop[:1]):
            i = next(k for k in range(3) if a[k] != b[k])
            sig = 1 if b[i] > a[i] else -1
            up = b if sig > 0 else a
            u += -sig * comps[i][up]
        return np.array([u])

    if kind == "bih2":
        # comps = [s11,s22,s33,s12,s13,s23]; H_ii = s_ii, H_ij = s_ij / 2
        SIDX = {(0, 0): 0, (1, 1): 1, (2, 2): 2, (0, 1): 3, (1, 0): 3,
                (0, 2): 4, (2, 0): 4, (1, 2): 5, (2, 1): 5}

        def H(r, i, x):
            v = comps[SIDX[(r, i)]][x]
            return v if r == i else 0.5 * v

        w = np.zeros(3)
        u = 0.0
        for a, b in zip(loop, loop[1:] + loop[:1]):
            i = next(k for k in range(3) if a[k] != b[k])
            sig = 1 if b[i] > a[i] else -1
            up = b if sig > 0 else a
            w_new = w + sig * np.array([H(r, i, up) for r in range(3)])
            w_up = w_new if sig > 0 else w
            u += sig * w_up[i]
            w = w_new
        return np.concatenate([[u], w])

    if kind == "bih1":
        # comps = [t11,t22,t12,t13,t21,t23,t31,t32]; Theta = -R_T^T G^b w
        TIDX = {(0, 0): 0, (1, 1): 1, (0, 1): 2, (0, 2): 3, (1, 0): 4,
                (1, 2): 5, (2, 0): 6, (2, 1): 7}

        def ginc(i, x):
            if i == 0:
                return -_bdiff(comps[TIDX[(2, 0)]], x, 2)
            if i == 1:
                return -_bdiff(comps[TIDX[(2, 1)]], x, 2)
            return _bdiff(comps[TIDX[(0, 0)]], x, 2) - _bdiff(comps[TIDX[(0, 2)]], x, 0)

        def G(r, i, x, g):
            if r != i:
                return -comps[TIDX[(r, i)]][x]
            if r == 2:
                return g
            return g - comps[TIDX[(r, r)]][x]

        g = 0.0
        w = np.zeros(3)
        for a, b in zip(loop, loop[1:] + loop[:1]):
            i = next(k for k in range(3) if a[k] != b[k])
            sig = 1 if b[i] > a[i] else -1
            up = b if sig > 0 else a
            g_new = g + sig * ginc(i, up)
            g_up = g_new if sig > 0 else g
            w = w + sig * np.array([G(r, i, up, g_up) for r in range(3)])
            g = g_new
        return np.concatenate([[g], w])

    if kind == "ela":
        # comps = [s11,s22,s33,s12,s13,s23]; Theta = -R_S^T G^b w
        SIDX = {(0, 0): 0, (1, 1): 1, (2, 2): 2, (0, 1): 3, (1, 0): 3,
                (0, 2): 4, (2, 0): 4, (1, 2): 5, (2, 1): 5}
        EPS = np.zeros((3, 3, 3))
        for ii, jj, kk in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
            EPS[ii, jj, kk] = 1.0
            EPS[ii, kk, jj] = -1.0

        def S(r, i, x):
            v = comps[SIDX[(r, i)]][x]
            return -v if r == i else -0.5 * v

        def curlS(i, r, x):
            # (Curl S)_{ir} = sum_{k,l} eps_{rkl} Dbar_k S_{il}
            total = 0.0
            for k in range(3):
                for l in range(3):
                    if EPS[r, k, l]:
                        y = list(x)
                        y[k] -= 1
                        back = S(i, l, tuple(y)) if y[k] >= 0 else 0.0
                        total += EPS[r, k, l] * (S(i, l, x) - back)
            return total

        c = np.zeros(3)
        w = np.zeros(3)
        for a, b in zip(loop, loop[1:] + loop[:1]):
            i = next(k for k in range(3) if a[k] != b[k])
            sig = 1 if b[i] > a[i] else -1
            up = b if sig > 0 else a
            c_new = c + sig * np.array([2.0 * curlS(i, r, up) for r in range(3)])
            c_up = c_new if sig > 0 else c
            spn = np.array([[0, -c_up[2], c_up[1]],
                            [c_up[2], 0, -c_up[0]],
                            [-c_up[1], c_up[0], 0]])
            w = w + sig * (np.array([S(r, i, up) for r in range(3)])
                           + 0.5 * spn[:, i])
            c = c_new
        return np.concatenate([0.5 * c, w])

    raise ValueError(kind)


def _expected_jump(kind: str, fi: int, x1) -> np.ndarray:
    """Closed-form functionals of the constructed cut fields."""
    x1 = np.asarray(x1, dtype=float)
    if kind == "derham":
        return np.array([1.0])
    if kind == "bih1":   # rho = x, e1, e2, e3 ; [g, w]
        if fi == 0:
            return np.concatenate([[1.0], x1])
        return np.concatenate([[0.0], np.eye(3)[fi - 1]])
    if kind == "bih2":   # rho = 1, x1, x2, x3 ; [u, grad u]
        if fi == 0:
            return np.concatenate([[1.0], np.zeros(3)])
        return np.concatenate([[x1[fi - 1]], np.eye(3)[fi - 1]])
    if kind == "ela":    # rho = e_k x x (k<3), e_k ; [curl/2, w]
        if fi < 3:
            ek = np.eye(3)[fi]
            return np.concatenate([ek, np.cross(ek, x1)])
        return np.concatenate([np.zeros(3), np.eye(3)[fi - 3]])
    raise ValueError(kind)


def _functional_matrix(dom, kind, mc, B, collars, deep, family):
    shape = node_shape(dom.voxels)
    nfun = len(family)
    p = len(collars)
    loops = []
    for cc in collars:
        loop, x0, x1 = _deep_loop(dom, cc, deep)
        loops.append((loop, x0, x1))
    beta = np.zeros((p * nfun, B.shape[1]))
    expected = np.zeros_like(beta)
    for li, (loop, x0, x1) in enumerate(loops):
        for col in range(B.shape[1]):
            comps = _comp_arrays(mc, B[:, col], 2, shape)
            vals = _recover_monodromy(kind, comps, loop)
            beta[li * nfun:(li + 1) * nfun, col] = vals
        # the monodromy continues the polynomial branch back to the loop
        # base x0, so the anchor point in the closed forms is x0
        for fi in range(nfun):
            col = li * nfun + fi
            expected[li * nfun:(li + 1) * nfun, col] = \
                _expected_jump(kind, fi, x0)
    return beta, expected


# ---------------------------------------------------------------------------
# de Rham potentials (PDE-style solves)
# ---------------------------------------------------------------------------

def dirichlet_potential(dc, cavity_index: int):
    """u with u = 1 on the wall of the chosen cavity, 0 on the others,
    discrete Laplace residual zero at interior nodes; returns (u, grad u)."""
    from voxhodge.derham import as_masked_complex
    dom = dc.dom
    mc = as_masked_complex(dc)
    _, mcount = complement_components(dom)
    if cavity_index < 1 or cavity_index > mcount - 1:
        raise GeometryError(f"cavity index {cavity_index} out of range")
    prof = cavity_profile(dom, cavity_index + 1).ravel()
    A0 = mc.A0
    m0 = mc.masks[0]
    xi = prof
    theta = A0 @ xi[m0]
    lu = _spd_solver((A0.T @ A0).tocsc())
    psi = lu.solve(A0.T @ theta)
    u = xi.copy()
    u_m0 = xi[m0] - psi
    u[m0] = u_m0
    grad_u = theta - A0 @ psi
    return u, grad_u


def neumann_potential(dc, cut_index: int):
    """psi from min ||grad psi - Theta_j|| with component-mean-zero gauge;
    returns (psi, projected cut field)."""
    dom = dc.dom
    from voxhodge.derham import as_masked_complex
    mc = as_masked_complex(dc)
    inv = invariants(dom)
    if cut_index < 1 or cut_index > inv.p:
        raise GeometryError(f"cut index {cut_index} out of range")
    basis = neumann_basis(dom, "derham", mc=mc)
    cc, _ = basis.anchors[cut_index - 1]
    # reconstruct the pre-projection field and potential solve for reporting
    shape = node_shape(dom.voxels)
    theta_flat = cc.theta.ravel()
    m3 = mc.masks[3]
    A2 = mc.A2
    K = _kernel_gauge(dom, "derham", m3)
    G = (A2 @ A2.T).tocsr()
    S = sp.bmat([[G, sp.csr_matrix(K)], [sp.csr_matrix(K.T), None]],
                format="csc")
    lu = spla.splu(S)
    w = theta_flat[m3]
    Theta = A2.T @ w
    Theta = np.where(cc.slab_on_slot(mc, 2), 0.0, Theta)
    rhs = np.concatenate([A2 @ Theta, np.zeros(K.shape[1])])
    psi = lu.solve(rhs)[:G.shape[0]]
    return psi, Theta - A2.T @ psi
