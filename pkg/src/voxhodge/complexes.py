"""Abstract engine for triples (A0, A1, A2) with the complex property.

Builds the block operator D = [[A2, 0], [A1*, A0]] and its adjoint, computes
kernel/cohomology dimensions and Fredholm indices, Helmholtz-type
decompositions, stability constants, and weighted variants.  Everything is a
finite matrix; adjoints are plain transposes unless a weight pair is given,
in which case they are formed explicitly as matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve, cholesky

from voxhodge.linalg import (
    GapAudit, NoPositiveSingularValue, RankTolerance, intersect_nullspaces,
    least_squares_project, nullspace_basis, numerical_rank_with_gap,
    singular_values, smallest_positive_singular_value,
)


class InvariantViolation(Exception):
    """A structural identity that must hold exactly failed."""


def _norm(M) -> float:
    if sp.issparse(M):
        return float(np.sqrt((M.multiply(M)).sum())) if M.nnz else 0.0
    return float(np.linalg.norm(M)) if M.size else 0.0


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


@dataclass
class OperatorTriple:
    """Three chained matrices A0: d0->d1, A1: d1->d2, A2: d2->d3."""

    A0: object
    A1: object
    A2: object
    label: str = ""

    def __post_init__(self):
        if self.A1.shape[1] != self.A0.shape[0]:
            raise ValueError("A1 columns must match A0 rows")
        if self.A2.shape[1] != self.A1.shape[0]:
            raise ValueError("A2 columns must match A1 rows")

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.A0.shape[1], self.A0.shape[0],
                self.A2.shape[1], self.A2.shape[0])


@dataclass
class WeightSpec:
    """SPD weights on the middle spaces; lambda0 = lambda3 = identity."""

    lambda1: np.ndarray
    lambda2: np.ndarray

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            L = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, L)
            if L.ndim != 2 or L.shape[0] != L.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.allclose(L, L.T, atol=1e-12 * max(1.0, abs(L).max())):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(L).min() <= 0:
                raise ValueError(f"{name} must be positive definite")

    @staticmethod
    def identity(triple: OperatorTriple) -> "WeightSpec":
        d = triple.dims
        return WeightSpec(np.eye(d[1]), np.eye(d[2]))

    @staticmethod
    def random(triple: OperatorTriple, rng, spread: float = 1.0) -> "WeightSpec":
        d = triple.dims

        def spd(n):
            B = rng.normal(size=(n, n)) * spread / max(np.sqrt(n), 1.0)
            return np.eye(n) + B @ B.T

        return WeightSpec(spd(d[1]), spd(d[2]))


def verify_complex(triple: OperatorTriple,
                   rel_tol: float = 1e-10) -> tuple[bool, tuple[float, float]]:
    """Check ran A0 in ker A1 and ran A1 in ker A2 via composition residuals."""
    r1 = _norm(triple.A1 @ triple.A0)
    r2 = _norm(triple.A2 @ triple.A1)
    s1 = _norm(triple.A1) * _norm(triple.A0)
    s2 = _norm(triple.A2) * _norm(triple.A1)
    ok = r1 <= rel_tol * max(s1, 1.0) and r2 <= rel_tol * max(s2, 1.0)
    return ok, (r1, r2)


def weighted_adjoints(triple: OperatorTriple, weights: WeightSpec | None):
    """Adjoint matrices (A0*, A1*, A2*) under the weighted inner products:
    A0* = A0^T l1,  A1* = l1^{-1} A1^T l2,  A2* = l2^{-1} A2^T."""
    A0, A1, A2 = triple.A0, triple.A1, triple.A2
    if weights is None:
        return A0.T, A1.T, A2.T
    l1, l2 = weights.lambda1, weights.lambda2
    c1 = cho_factor(l1)
    A0s = _dense(A0).T @ l1
    A1s = cho_solve(c1, _dense(A1).T @ l2)
    c2 = cho_factor(l2)
    A2s = cho_solve(c2, _dense(A2).T)
    return A0s, A1s, A2s


@dataclass
class DiracBlockOperator:
    """Block operator [[A2, 0], [A1*, A0]] with its adjoint blocks.

    Acts H2 x H0 -> H3 x H1.  ``metric_in``/``metric_out`` carry the weighted
    inner products of domain and codomain (None = euclidean).
    """

    matrix: object
    adjoint_matrix: object
    split_in: int    # H2 dimension (first block of the domain)
    split_out: int   # H3 dimension (first block of the codomain)
    metric_in: np.ndarray | None = None
    metric_out: np.ndarray | None = None

    @property
    def shape(self):
        return self.matrix.shape


def build_dirac(triple: OperatorTriple,
                weights: WeightSpec | None = None) -> DiracBlockOperator:
    ok, res = verify_complex(triple)
    if not ok:
        raise ValueError(f"not a complex: residuals {res}")
    A0, A1, A2 = triple.A0, triple.A1, triple.A2
    A0s, A1s, A2s = weighted_adjoints(triple, weights)
    d0, d1, d2, d3 = triple.dims
    if sp.issparse(A0) and weights is None:
        Z = sp.csr_matrix((d3, d0))
        Z2 = sp.csr_matrix((d0, d3))
        M = sp.bmat([[A2, Z], [A1s, A0]], format="csr")
        Ms = sp.bmat([[A2s, A1], [Z2, A0s]], format="csr")
    else:
        M = np.block([[_dense(A2), np.zeros((d3, d0))],
                      [_dense(A1s), _dense(A0)]])
        Ms = np.block([[_dense(A2s), _dense(A1)],
                       [np.zeros((d0, d3)), _dense(A0s)]])
    metric_in = metric_out = None
    if weights is not None:
        metric_in = np.block([
            [weights.lambda2, np.zeros((d2, d0))],
            [np.zeros((d0, d2)), np.eye(d0)]])
        metric_out = np.block([
            [np.eye(d3), np.zeros((d3, d1))],
            [np.zeros((d1, d3)), weights.lambda1]])
    return DiracBlockOperator(M, Ms, split_in=d2, split_out=d3,
                              metric_in=metric_in, metric_out=metric_out)


@dataclass
class CohomologyReport:
    """Kernel and cohomology dimensions of a complex plus the block indices."""

    dim_N0: int
    dim_K1: int
    dim_K2: int
    dim_N2star: int
    index: int
    index_adjoint: int
    poincare_constant: float | None = None
    flags: list = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        expect = self.dim_N0 - self.dim_K1 + self.dim_K2 - self.dim_N2star
        if self.index != expect or self.index_adjoint != -self.index:
            raise InvariantViolation(
                f"index bookkeeping broken: {self.index} vs {expect}")

    def as_dict(self) -> dict:
        return {
            "dim_N0": self.dim_N0, "dim_K1": self.dim_K1,
            "dim_K2": self.dim_K2, "dim_N2star": self.dim_N2star,
            "index_D": self.index, "index_Dstar": self.index_adjoint,
            "poincare_constant": self.poincare_constant,
            "flags": list(self.flags),
        }


def _dim_null(M, tol: RankTolerance, flags: list, what: str) -> int:
    rank, audit = numerical_rank_with_gap(M, tol, context=what)
    if audit.ambiguous:
        flags.append(f"rank-ambiguous:{what}:gap={audit.ratio:.2e}")
    return M.shape[1] - rank


def _stack(M1, M2):
    if sp.issparse(M1) or sp.issparse(M2):
        return sp.vstack([sp.csr_matrix(M1), sp.csr_matrix(M2)], format="csr")
    return np.vstack([_dense(M1), _dense(M2)])


def cohomology(triple: OperatorTriple, weights: WeightSpec | None = None,
               tol: RankTolerance = RankTolerance(),
               with_poincare: bool = False) -> CohomologyReport:
    """Dimensions N0, K1, K2, N2* and the index of the block operator."""
    ok, res = verify_complex(triple)
    if not ok:
        raise ValueError(f"not a complex: residuals {res}")
    A0, A1, A2 = triple.A0, triple.A1, triple.A2
    A0s, A1s, A2s = weighted_adjoints(triple, weights)
    flags: list = []
    n0 = _dim_null(A0, tol, flags, "N0")
    n2s = _dim_null(A2s, tol, flags, "N2star")
    k1 = _dim_null(_stack(A1, A0s), tol, flags, "K1")
    k2 = _dim_null(_stack(A2, A1s), tol, flags, "K2")
    idx = n0 - k1 + k2 - n2s
    c = None
    if with_poincare:
        D = build_dirac(triple, weights)
        try:
            c = poincare_constant(D, tol)
        except NoPositiveSingularValue:
            c = None
    return CohomologyReport(n0, k1, k2, n2s, idx, -idx,
                            poincare_constant=c, flags=flags,
                            label=triple.label)


def kernel_of_dirac(D: DiracBlockOperator, report: CohomologyReport,
                    tol: RankTolerance = RankTolerance()):
    """Kernel bases of D and D*; checks dim ker D = K2 + N0 and
    dim ker D* = N2* + K1 against the cohomology report."""
    kerD = nullspace_basis(D.matrix, tol)
    kerDs = nullspace_basis(D.adjoint_matrix, tol)
    ok = (kerD.shape[1] == report.dim_K2 + report.dim_N0
          and kerDs.shape[1] == report.dim_N2star + report.dim_K1)
    if not ok:
        raise InvariantViolation(
            f"dim ker D = {kerD.shape[1]} vs K2+N0 = "
            f"{report.dim_K2 + report.dim_N0}; "
            f"dim ker D* = {kerDs.shape[1]} vs N2*+K1 = "
            f"{report.dim_N2star + report.dim_K1}")
    return kerD, kerDs, ok


def index_from_kernels(D: DiracBlockOperator,
                       tol: RankTolerance = RankTolerance()) -> int:
    """ind D = dim ker D - dim ker D* (the defining formula)."""
    kD = nullspace_basis(D.matrix, tol).shape[1]
    kDs = nullspace_basis(D.adjoint_matrix, tol).shape[1]
    return kD - kDs


def helmholtz_decompose(triple: OperatorTriple, x,
                        weights: WeightSpec | None = None,
                        tol: RankTolerance = RankTolerance()):
    """Split x in H2 into (ran A2*, K2, ran A1) parts, weighted-orthogonal."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != triple.dims[2]:
        raise ValueError("vector must live in H2")
    A1 = _dense(triple.A1)
    _, _, A2s = weighted_adjoints(triple, weights)
    A2s = _dense(A2s)
    if weights is None:
        L = None
        xw = x
        A1w, A2sw = A1, A2s
    else:
        # weighted norm ||z||_l2 = ||L^T z|| with l2 = L L^T
        L = cholesky(weights.lambda2, lower=True)
        xw = L.T @ x
        A1w, A2sw = L.T @ A1, L.T @ A2s
    y, _ = least_squares_project(A1w, xw, tol)
    part_ran_a1 = A1 @ y
    z, _ = least_squares_project(A2sw, xw, tol)
    part_ran_a2s = A2s @ z
    part_k2 = x - part_ran_a1 - part_ran_a2s
    return part_ran_a2s, part_k2, part_ran_a1


def poincare_constant(D: DiracBlockOperator,
                      tol: RankTolerance = RankTolerance()) -> float:
    """Reciprocal of the smallest positive singular value of the block
    operator; the optimal constant in ||z|| <= c ||D z|| off the kernel."""
    M = D.matrix
    if D.metric_in is not None:
        # congruence to euclidean coordinates: M_eff = Lout^T M Lin^{-T}
        Lin = cholesky(D.metric_in, lower=True)
        Lout = cholesky(D.metric_out, lower=True)
        M = Lout.T @ _dense(M) @ np.linalg.inv(Lin.T)
    return 1.0 / smallest_positive_singular_value(M, tol)


def apply_weights(triple: OperatorTriple, weights: WeightSpec) -> OperatorTriple:
    """Form the modified triple (A0, l2^{-1} A1, A2 l2) carrying the weighted
    inner products; kernel/cohomology dimensions are unchanged."""
    l2 = weights.lambda2
    c2 = cho_factor(l2)
    A1t = cho_solve(c2, _dense(triple.A1))
    A2t = _dense(triple.A2) @ l2
    return OperatorTriple(_dense(triple.A0), A1t, A2t,
                          label=triple.label + "+weights")


def general_index_relation(report: CohomologyReport, n: int, m: int, p: int):
    """Check dim K1 = (N2*/n)(m-1), dim K2 = (N2*/n) p and the matching index.

    Returns None when N2* is not divisible by n (relation not applicable).
    """
    if n <= 0 or report.dim_N2star % n != 0:
        return None
    k = report.dim_N2star // n
    return (report.dim_K1 == k * (m - 1)
            and report.dim_K2 == k * p
            and report.index == k * (p - m - n + 1))


# ---------------------------------------------------------------------------
# seeded random complexes (exact-by-construction up to one projection)
# ---------------------------------------------------------------------------

def random_complex(rng, max_dim: int = 12, label: str = "") -> OperatorTriple:
    """Draw A0 randomly, then A1, A2 as random maps composed with orthogonal
    projectors annihilating the previous range (rank-aware, so degenerate
    shapes stay exact)."""
    d = rng.integers(1, max_dim + 1, size=4)
    d0, d1, d2, d3 = (int(v) for v in d)
    A0 = rng.normal(size=(d1, d0))
    N0 = nullspace_basis(A0.T)          # orthonormal basis of (ran A0)^perp
    A1 = (rng.normal(size=(d2, N0.shape[1])) @ N0.T) if N0.shape[1] else np.zeros((d2, d1))
    N1 = nullspace_basis(A1.T)
    A2 = (rng.normal(size=(d3, N1.shape[1])) @ N1.T) if N1.shape[1] else np.zeros((d3, d2))
    return OperatorTriple(A0, A1, A2, label=label or f"random{d0}{d1}{d2}{d3}")
