"""Node grids over voxel bounding boxes, commuting shift/difference matrices,
component masks, and assembly of the four differential complexes as sparse
integer matrices.

Conventions
-----------
A domain is a boolean voxel array ``F`` (True = filled) inside a bounding box
with at least one empty layer of margin.  Nodes are the lattice points of the
box; a field assigns values to all nodes, one block per component.

``D[d]`` is the forward difference u -> u(.+e_d) - u(x) on the full node
grid with zero beyond the box.  All D commute exactly, entries are integers
(grid spacing h = 1), so every composed operator identity holds bit-exactly.

Component order:
  vector:       [v1, v2, v3]
  symmetric:    [s11, s22, s33, s12, s13, s23]
  trace-free:   [t11, t22, t12, t13, t21, t23, t31, t32]   (t33 = -t11-t22)

Operators carry integer scalings (3*devGrad, 2*symGrad, 2*symCurl) so that
all entries stay integers; kernels, cohomology and indices are unaffected.

Boundary conditions: the first slot of a complex is supported on interior
nodes (all 8 incident voxels filled); each later slot is the structural reach
of the previous one, which keeps the complex property bit-exact and
reproduces the continuum cohomology dimensions (verified in tests against
integer cubical homology).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

KINDS = ("derham", "bih1", "bih2", "ela")

# component counts per slot and integer scalings (A0, A1, A2) per kind
COMPONENTS = {
    "derham": (1, 3, 3, 1),
    "bih1": (1, 6, 8, 3),
    "bih2": (3, 8, 6, 1),
    "ela": (3, 6, 6, 3),
}
OP_SCALES = {
    "derham": (1, 1, 1),
    "bih1": (1, 1, 1),
    "bih2": (3, 2, 1),   # 3*devGrad, 2*symCurl, divDiv
    "ela": (2, 1, 1),    # 2*symGrad, CurlCurl^T, Div
}


def node_shape(F: np.ndarray) -> tuple[int, int, int]:
    return tuple(n + 1 for n in F.shape)


def node_count(F: np.ndarray) -> int:
    return int(np.prod(node_shape(F)))


def shift_matrices(F: np.ndarray) -> list[sp.csr_matrix]:
    """S_d: u -> u(.+e_d), zero beyond the box; square on the full node grid."""
    shape = node_shape(F)
    out = []
    for d in range(3):
        mats = [sp.eye(m, m, 1 if k == d else 0, format="csr")
                for k, m in enumerate(shape)]
        S = mats[0]
        for m in mats[1:]:
            S = sp.kron(S, m, format="csr")
        out.append(S.tocsr())
    return out


def forward_diffs(F: np.ndarray) -> list[sp.csr_matrix]:
    nn = node_count(F)
    I = sp.eye(nn, format="csr")
    return [(S - I).tocsr() for S in shift_matrices(F)]


def backward_diffs(F: np.ndarray) -> list[sp.csr_matrix]:
    """u -> u(x) - u(.-e_d); reproduces degree-1 derivatives exactly, equals
    minus the transpose of the forward difference."""
    return [(-D.T).tocsr() for D in forward_diffs(F)]


# ---------------------------------------------------------------------------
# node masks
# ---------------------------------------------------------------------------

def _accumulate(F: np.ndarray, ext: tuple[int, int, int], all_of: bool) -> np.ndarray:
    shape = node_shape(F)
    M = np.ones(shape, dtype=bool) if all_of else np.zeros(shape, dtype=bool)
    ranges = [(0,) if e else (0, 1) for e in ext]
    for dx in ranges[0]:
        for dy in ranges[1]:
            for dz in ranges[2]:
                T = np.zeros(shape, dtype=bool)
                T[dx:dx + F.shape[0], dy:dy + F.shape[1], dz:dz + F.shape[2]] = F
                M = (M & T) if all_of else (M | T)
    return M


def cell_in_complex(F: np.ndarray, ext: tuple[int, int, int]) -> np.ndarray:
    """Cells [x, x+ext] contained in the closed voxel set (some incident
    voxel filled)."""
    return _accumulate(F, ext, all_of=False)


def cell_interior(F: np.ndarray, ext: tuple[int, int, int]) -> np.ndarray:
    """Cells whose open interior lies in the open voxel set (every incident
    voxel filled)."""
    return _accumulate(F, ext, all_of=True)


def omega_nodes(F: np.ndarray) -> np.ndarray:
    return cell_in_complex(F, (0, 0, 0))


def interior_nodes(F: np.ndarray) -> np.ndarray:
    return cell_interior(F, (0, 0, 0))


# ---------------------------------------------------------------------------
# full-box operators
# ---------------------------------------------------------------------------

def _blk(rows):
    return sp.bmat(rows, format="csr")


_EPS = np.zeros((3, 3, 3), dtype=int)
for _i, _j, _k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
    _EPS[_i, _j, _k] = 1
    _EPS[_i, _k, _j] = -1


def _nine_ops(D):
    """Row-wise Grad/Curl/Div + transpose and embed/drop maps on full
    9-component tensor fields (components (i,j) at index 3i+j)."""
    nn = D[0].shape[0]
    Z = sp.csr_matrix((nn, nn))
    I = sp.eye(nn, format="csr")

    grad9 = []
    for i in range(3):
        for j in range(3):
            r = [Z, Z, Z]
            r[i] = D[j]
            grad9.append(r)
    G9 = _blk(grad9)

    curl9 = []
    for i in range(3):
        for j in range(3):
            r = [Z] * 9
            for k in range(3):
                for l in range(3):
                    if _EPS[j, k, l]:
                        r[i * 3 + l] = r[i * 3 + l] + _EPS[j, k, l] * D[k]
            curl9.append(r)
    C9 = _blk(curl9)

    div9 = []
    for i in range(3):
        r = [Z] * 9
        for k in range(3):
            r[i * 3 + k] = D[k]
        div9.append(r)
    V9 = _blk(div9)

    tr9 = []
    for i in range(3):
        for j in range(3):
            r = [Z] * 9
            r[j * 3 + i] = I
            tr9.append(r)
    T9 = _blk(tr9)

    # symmetric storage [11,22,33,12,13,23] <-> full
    RS = _blk([[I, Z, Z, Z, Z, Z],
               [Z, Z, Z, I, Z, Z],
               [Z, Z, Z, Z, I, Z],
               [Z, Z, Z, I, Z, Z],
               [Z, I, Z, Z, Z, Z],
               [Z, Z, Z, Z, Z, I],
               [Z, Z, Z, Z, I, Z],
               [Z, Z, Z, Z, Z, I],
               [Z, Z, I, Z, Z, Z]])
    PS = _blk([[I, Z, Z, Z, Z, Z, Z, Z, Z],
               [Z, Z, Z, Z, I, Z, Z, Z, Z],
               [Z, Z, Z, Z, Z, Z, Z, Z, I],
               [Z, I, Z, Z, Z, Z, Z, Z, Z],
               [Z, Z, I, Z, Z, Z, Z, Z, Z],
               [Z, Z, Z, Z, Z, I, Z, Z, Z]])
    # trace-free storage [11,22,12,13,21,23,31,32] <-> full (t33 = -t11-t22)
    RT = _blk([[I, Z, Z, Z, Z, Z, Z, Z],
               [Z, Z, I, Z, Z, Z, Z, Z],
               [Z, Z, Z, I, Z, Z, Z, Z],
               [Z, Z, Z, Z, I, Z, Z, Z],
               [Z, I, Z, Z, Z, Z, Z, Z],
               [Z, Z, Z, Z, Z, I, Z, Z],
               [Z, Z, Z, Z, Z, Z, I, Z],
               [Z, Z, Z, Z, Z, Z, Z, I],
               [-I, -I, Z, Z, Z, Z, Z, Z]])
    PT = _blk([[I, Z, Z, Z, Z, Z, Z, Z, Z],
               [Z, Z, Z, Z, I, Z, Z, Z, Z],
               [Z, I, Z, Z, Z, Z, Z, Z, Z],
               [Z, Z, I, Z, Z, Z, Z, Z, Z],
               [Z, Z, Z, I, Z, Z, Z, Z, Z],
               [Z, Z, Z, Z, Z, I, Z, Z, Z],
               [Z, Z, Z, Z, Z, Z, I, Z, Z],
               [Z, Z, Z, Z, Z, Z, Z, I, Z]])
    return G9, C9, V9, T9, RS, PS, RT, PT, I, Z


def full_operators(D, kind: str):
    """(A0, A1, A2) of the requested complex on the full node grid.

    D is a commuting difference family (forward or backward); entries integer.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown complex kind {kind!r}")
    D1, D2, D3 = D
    G9, C9, V9, T9, RS, PS, RT, PT, I, Z = _nine_ops(D)

    if kind == "derham":
        A0 = _blk([[D1], [D2], [D3]])
        A1 = _blk([[Z, -D3, D2], [D3, Z, -D1], [-D2, D1, Z]])
        A2 = _blk([[D1, D2, D3]])
    elif kind == "bih1":
        # hessian -> row curl on symmetric -> row div on trace-free
        A0 = _blk([[D1 @ D1], [D2 @ D2], [D3 @ D3],
                   [D1 @ D2], [D1 @ D3], [D2 @ D3]])
        A1 = (PT @ C9 @ RS).tocsr()
        A2 = (V9 @ RT).tocsr()
    elif kind == "bih2":
        # 3*devGrad -> 2*symCurl -> divDiv
        tr_embed = _blk([[I], [Z], [Z], [Z], [I], [Z], [Z], [Z], [I]])
        div_row = _blk([[D1, D2, D3]])
        A0 = (PT @ (3 * G9 - tr_embed @ div_row)).tocsr()
        A1 = (PS @ (C9 + T9 @ C9) @ RT).tocsr()
        A2 = _blk([[D1 @ D1, D2 @ D2, D3 @ D3,
                    2 * (D1 @ D2), 2 * (D1 @ D3), 2 * (D2 @ D3)]])
    else:  # ela
        # 2*symGrad -> Curl(Curl .)^T -> row div on symmetric
        A0 = (PS @ (G9 + T9 @ G9)).tocsr()
        A1 = (PS @ C9 @ T9 @ C9 @ RS).tocsr()
        A2 = (V9 @ RS).tocsr()
    for M in (A0, A1, A2):
        M.eliminate_zeros()
    return A0, A1, A2


# ---------------------------------------------------------------------------
# masked complexes
# ---------------------------------------------------------------------------

def structural_reach(A: sp.csr_matrix, colmask: np.ndarray) -> np.ndarray:
    """Rows of A structurally coupled to any True column."""
    B = A.copy()
    B.data = np.abs(B.data)
    return (B @ colmask.astype(float)) > 0.0


@dataclass
class MaskedComplex:
    """A complex restricted to per-component node masks per slot."""

    kind: str
    F: np.ndarray
    A0: sp.csr_matrix
    A1: sp.csr_matrix
    A2: sp.csr_matrix
    masks: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    scales: tuple[int, int, int]

    @property
    def dims(self):
        return tuple(int(m.sum()) for m in self.masks)


def build_masked_complex(F: np.ndarray, kind: str,
                         diff_family: str = "forward",
                         base: str = "interior") -> MaskedComplex:
    """Assemble the complex with the reach masking scheme.

    base='interior' gives the boundary-condition (primal) complex whose
    transposes realize the no-boundary-condition adjoints.
    """
    D = forward_diffs(F) if diff_family == "forward" else backward_diffs(F)
    A0, A1, A2 = full_operators(D, kind)
    comps = COMPONENTS[kind]
    nodes = interior_nodes(F) if base == "interior" else omega_nodes(F)
    if not nodes.any():
        raise DomainTooThin(
            f"domain has no interior nodes; features must be >= 2 voxels thick")
    m0 = np.tile(nodes.ravel(), comps[0])
    m1 = structural_reach(A0, m0)
    m2 = structural_reach(A1, m1)
    m3 = structural_reach(A2, m2)
    A0r = A0[m1][:, m0].tocsr()
    A1r = A1[m2][:, m1].tocsr()
    A2r = A2[m3][:, m2].tocsr()
    return MaskedComplex(kind, F, A0r, A1r, A2r, (m0, m1, m2, m3),
                         OP_SCALES[kind])


class DomainTooThin(Exception):
    """Voxel features too thin for the stencil radius of the operators."""


def embed(vec: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero-extend a masked coefficient vector to the full grid layout."""
    out = np.zeros(mask.shape[0], dtype=float)
    out[mask] = vec
    return out


def restrict(full: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.asarray(full, dtype=float)[mask]
