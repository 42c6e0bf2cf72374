"""Rank-revealing linear algebra shared by every other module.

All operators in this package are finite real matrices (dense ndarray or
scipy sparse).  Kernel dimensions must come out as stable integers, so every
rank decision records the spectral gap around the cut and flags ambiguous
cases instead of silently rounding.

Dense SVD is authoritative up to ``DENSE_LIMIT`` on the smaller dimension.
Above that, the smallest singular pairs are located by shift-inverted
eigenvalue solves on the Gram matrix, refined by one inverse-iteration step,
and then *measured in the original (unsquared) arithmetic* via a thin dense
SVD of M @ Q; plain Gram eigenvalues only resolve squared singular values to
machine epsilon absolute, which is too coarse near a relative threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import svd as dense_svd

DENSE_LIMIT = 2000
EIG_BUDGET = 28


class NoPositiveSingularValue(Exception):
    """Raised when a smallest positive singular value is requested of a zero matrix."""


@dataclass(frozen=True)
class RankTolerance:
    """Threshold rule: sigma counts toward the rank iff
    sigma > max(relative * sigma_max, absolute)."""

    relative: float = 1e-9
    absolute: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.relative < 1.0):
            raise ValueError(f"relative threshold must be in (0,1), got {self.relative}")
        if self.absolute < 0.0:
            raise ValueError("absolute floor must be nonnegative")

    def cut(self, sigma_max: float) -> float:
        return max(self.relative * sigma_max, self.absolute)


@dataclass
class GapAudit:
    """Record of the riskiest numerical decision: where the rank was cut."""

    below: float = 0.0          # largest singular value counted as zero
    above: float = np.inf       # smallest singular value counted as nonzero
    threshold: float = 0.0
    ambiguous: bool = False
    context: str = ""

    @property
    def ratio(self) -> float:
        if self.below <= 0.0:
            return np.inf
        return self.above / self.below


def _as_dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def _check_finite(M):
    data = M.data if sp.issparse(M) else np.asarray(M)
    if data.size and not np.all(np.isfinite(data)):
        raise ValueError("matrix has non-finite entries")


def _audit_from_spectrum(s: np.ndarray, thr: float, context: str = "") -> GapAudit:
    below = s[s <= thr]
    above = s[s > thr]
    audit = GapAudit(
        below=float(below.max()) if below.size else 0.0,
        above=float(above.min()) if above.size else np.inf,
        threshold=thr,
        context=context,
    )
    audit.ambiguous = audit.below > 0.0 and audit.above / max(audit.below, 1e-300) < 10.0
    return audit


def singular_values(M) -> np.ndarray:
    _check_finite(M)
    if min(M.shape) == 0:
        return np.zeros(0)
    return dense_svd(_as_dense(M), compute_uv=False)


# ---------------------------------------------------------------------------
# sparse small-singular-subspace core
# ---------------------------------------------------------------------------

def _small_subspace(M, tol: RankTolerance, kmax: int = EIG_BUDGET,
                    context: str = ""):
    """Candidate subspace for the smallest singular directions of sparse M.

    Returns (W, s, sigma_max, thr): columns of W span candidates in the
    column space of variables, s are exact singular values of M restricted
    to that subspace (ascending order, aligned with W's columns), computed
    as a thin dense SVD of M @ Q.
    """
    M = sp.csr_matrix(M)
    n = M.shape[1]
    G = (M.T @ M).tocsc()
    lmax = float(spla.eigsh(G, k=1, which="LA", return_eigenvectors=False,
                            maxiter=5000)[0])
    sig_max = np.sqrt(max(lmax, 0.0))
    thr = tol.cut(sig_max)
    if sig_max == 0.0:
        return np.eye(n), np.zeros(n), 0.0, thr
    k = min(kmax, n - 2)
    shift = 1e-8 * lmax
    w, V = spla.eigsh(G + shift * sp.eye(n, format="csc"), k=k, sigma=0.0,
                      which="LM")
    w = np.maximum(w - shift, 0.0)
    coarse = max((10.0 * thr) ** 2, 1e-13 * lmax)
    above = w[w > coarse]
    tau = float(above.min()) / 100.0 if above.size else 1e-12 * lmax
    lu = spla.splu((G + tau * sp.eye(n, format="csc")).tocsc())
    Q, _ = np.linalg.qr(lu.solve(V))
    B = np.asarray(M @ Q)
    Ub, sb, Vbt = dense_svd(B, full_matrices=False)
    order = np.argsort(sb)
    s = sb[order]
    W = Q @ Vbt.T[:, order]
    dim_below = int(np.sum(s <= thr))
    if dim_below >= k:
        raise RuntimeError(
            f"kernel dimension reached eigensolver budget k={k} ({context}); "
            "raise EIG_BUDGET")
    return W, s, sig_max, thr


def numerical_rank(M, tol: RankTolerance = RankTolerance()) -> int:
    """Number of singular values above the tolerance cut."""
    rank, _ = numerical_rank_with_gap(M, tol)
    return rank


def numerical_rank_with_gap(M, tol: RankTolerance = RankTolerance(),
                            context: str = "") -> tuple[int, GapAudit]:
    _check_finite(M)
    if min(M.shape) == 0:
        return 0, GapAudit(context=context)
    if min(M.shape) <= DENSE_LIMIT:
        s = singular_values(M)
        thr = tol.cut(float(s[0])) if s.size else tol.absolute
        return int(np.sum(s > thr)), _audit_from_spectrum(s, thr, context)
    _, s, sig_max, thr = _small_subspace(M, tol, context=context)
    dim = int(np.sum(s <= thr))
    audit = _audit_from_spectrum(np.concatenate([s, [sig_max]]), thr, context)
    return M.shape[1] - dim, audit


def nullspace_basis(M, tol: RankTolerance = RankTolerance()) -> np.ndarray:
    """Orthonormal basis of ker(M), columns; shape (cols, cols - rank)."""
    _check_finite(M)
    n = M.shape[1]
    if M.shape[0] == 0 or n == 0:
        return np.eye(n)
    if min(M.shape) <= DENSE_LIMIT and max(M.shape) <= 8 * DENSE_LIMIT:
        A = _as_dense(M)
        _, s, Vt = dense_svd(A, full_matrices=True)
        thr = tol.cut(float(s[0])) if s.size else tol.absolute
        rank = int(np.sum(s > thr))
        return Vt[rank:].T
    W, s, _, thr = _small_subspace(M, tol)
    B = W[:, s <= thr]
    q, _ = np.linalg.qr(B) if B.shape[1] else (B, None)
    return q


def intersect_nullspaces(M1, M2, tol: RankTolerance = RankTolerance()) -> np.ndarray:
    """Orthonormal basis of ker(M1) ∩ ker(M2) via the stacked matrix."""
    if M1.shape[1] != M2.shape[1]:
        raise ValueError(f"column mismatch: {M1.shape[1]} vs {M2.shape[1]}")
    if sp.issparse(M1) or sp.issparse(M2):
        stack = sp.vstack([sp.csr_matrix(M1), sp.csr_matrix(M2)])
    else:
        stack = np.vstack([M1, M2])
    return nullspace_basis(stack, tol)


def kernel_dimension_with_gap(M, tol: RankTolerance = RankTolerance(),
                              context: str = "") -> tuple[int, GapAudit]:
    rank, audit = numerical_rank_with_gap(M, tol, context)
    return M.shape[1] - rank, audit


def least_squares_project(A, b, tol: RankTolerance = RankTolerance()):
    """Minimum-norm least squares: x minimizing ||Ax - b||, plus residual r = b - Ax.

    r is the orthogonal projection of b onto the complement of ran(A).
    """
    _check_finite(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != b.shape[0]:
        raise ValueError("row count of A must match length of b")
    if sp.issparse(A):
        res = spla.lsqr(A, b, atol=1e-14, btol=1e-14, conlim=0.0,
                        iter_lim=10 * max(A.shape))
        x = res[0]
    else:
        x = np.linalg.lstsq(A, b, rcond=tol.relative)[0]
    return x, b - A @ x


def smallest_positive_singular_value(M, tol: RankTolerance = RankTolerance()) -> float:
    """Smallest singular value counted in the numerical rank."""
    _check_finite(M)
    if min(M.shape) == 0:
        raise NoPositiveSingularValue("empty matrix")
    if min(M.shape) <= DENSE_LIMIT:
        s = singular_values(M)
        thr = tol.cut(float(s[0]))
        positive = s[s > thr]
        if positive.size == 0:
            raise NoPositiveSingularValue("matrix has no singular value above tolerance")
        return float(positive.min())
    Mm = sp.csr_matrix(M)
    if Mm.shape[1] > Mm.shape[0]:
        Mm = Mm.T.tocsr()
    _, s, _, thr = _small_subspace(Mm, tol)
    positive = s[s > thr]
    if positive.size == 0:
        raise NoPositiveSingularValue("no singular value above tolerance found")
    return float(positive.min())
