"""Exact polynomial arithmetic in three variables, plus scalar/vector/tensor
fields with polynomial components and the pointwise and differential tensor
operators acting on them.

Coefficients are ``Fraction`` by default so that every identity check is an
exact zero test, not a tolerance comparison.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

import numpy as np


class Poly3:
    """Sparse polynomial in x1, x2, x3: exponent triple -> coefficient."""

    __slots__ = ("c",)

    def __init__(self, coeffs=None):
        self.c: dict[tuple[int, int, int], Fraction] = {}
        if coeffs:
            for mono, v in coeffs.items():
                v = Fraction(v)
                if v:
                    self.c[tuple(mono)] = v

    @staticmethod
    def const(v) -> "Poly3":
        return Poly3({(0, 0, 0): Fraction(v)})

    @staticmethod
    def var(i: int) -> "Poly3":
        mono = [0, 0, 0]
        mono[i] = 1
        return Poly3({tuple(mono): Fraction(1)})

    def __bool__(self):
        return bool(self.c)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly3.const(other)
        return self.c == other.c

    def __hash__(self):
        return hash(frozenset(self.c.items()))

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly3.const(other)
        out = dict(self.c)
        for m, v in other.c.items():
            w = out.get(m, Fraction(0)) + v
            if w:
                out[m] = w
            else:
                out.pop(m, None)
        p = Poly3()
        p.c = out
        return p

    __radd__ = __add__

    def __neg__(self):
        p = Poly3()
        p.c = {m: -v for m, v in self.c.items()}
        return p

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly3.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return Poly3.const(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly3.const(other)
        out: dict[tuple[int, int, int], Fraction] = {}
        for m1, v1 in self.c.items():
            for m2, v2 in other.c.items():
                m = (m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2])
                w = out.get(m, Fraction(0)) + v1 * v2
                if w:
                    out[m] = w
                else:
                    out.pop(m, None)
        p = Poly3()
        p.c = out
        return p

    __rmul__ = __mul__

    def diff(self, i: int) -> "Poly3":
        out: dict[tuple[int, int, int], Fraction] = {}
        for m, v in self.c.items():
            if m[i] == 0:
                continue
            mm = list(m)
            mm[i] -= 1
            out[tuple(mm)] = v * m[i]
        p = Poly3()
        p.c = out
        return p

    def degree(self) -> int:
        return max((sum(m) for m in self.c), default=-1)

    def eval(self, x) -> Fraction:
        val = Fraction(0)
        for (a, b, c), v in self.c.items():
            val += v * Fraction(x[0]) ** a * Fraction(x[1]) ** b * Fraction(x[2]) ** c
        return val

    def __repr__(self):
        if not self.c:
            return "0"
        parts = []
        for m, v in sorted(self.c.items()):
            mono = "*".join(f"x{i+1}^{e}" for i, e in enumerate(m) if e)
            parts.append(f"{v}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


X1, X2, X3 = Poly3.var(0), Poly3.var(1), Poly3.var(2)
ZERO = Poly3()


class PolyField:
    """Scalar, vector (3,) or tensor (3,3) field with Poly3 components."""

    def __init__(self, comps):
        self.a = np.asarray(comps, dtype=object)
        if self.a.shape not in ((), (3,), (3, 3)):
            raise ValueError(f"bad field shape {self.a.shape}")

    @property
    def shape(self):
        return self.a.shape

    @staticmethod
    def scalar(p: Poly3) -> "PolyField":
        return PolyField(np.asarray(p, dtype=object))

    @staticmethod
    def vector(ps: Iterable[Poly3]) -> "PolyField":
        return PolyField(list(ps))

    @staticmethod
    def tensor(rows) -> "PolyField":
        return PolyField([list(r) for r in rows])

    def is_zero(self) -> bool:
        return all(not p for p in self.a.flat)

    def __eq__(self, other):
        return self.shape == other.shape and all(
            p == q for p, q in zip(self.a.flat, other.a.flat))

    def __add__(self, other):
        return PolyField(self.a + other.a)

    def __sub__(self, other):
        return PolyField(self.a - other.a)

    def __neg__(self):
        return PolyField(-self.a)

    def __mul__(self, s):
        return PolyField(self.a * s)

    __rmul__ = __mul__

    def T(self) -> "PolyField":
        if self.shape != (3, 3):
            raise ValueError("transpose needs a tensor field")
        return PolyField(self.a.T.copy())

    def eval(self, x):
        return np.array([p.eval(x) for p in self.a.flat],
                        dtype=object).reshape(self.shape)

    def eval_float(self, x) -> np.ndarray:
        return np.array([float(p.eval(x)) for p in self.a.flat],
                        dtype=float).reshape(self.shape)

    def degree(self) -> int:
        return max((p.degree() for p in self.a.flat), default=-1)


# ---------------------------------------------------------------------------
# pointwise algebra
# ---------------------------------------------------------------------------

def spn(v: PolyField) -> PolyField:
    """Skew matrix of a vector: spn(v) w = v x w."""
    v1, v2, v3 = v.a
    return PolyField.tensor([[ZERO, -v3, v2],
                             [v3, ZERO, -v1],
                             [-v2, v1, ZERO]])


def spn_inv(T: PolyField) -> PolyField:
    """Inverse of spn on exactly-skew tensors."""
    if not sym(T).is_zero():
        raise ValueError("spn_inv requires an exactly skew-symmetric tensor")
    return PolyField.vector([T.a[2][1], T.a[0][2], T.a[1][0]])


def sym(T: PolyField) -> PolyField:
    return PolyField((T.a + T.a.T) * Fraction(1, 2))


def skw(T: PolyField) -> PolyField:
    return PolyField((T.a - T.a.T) * Fraction(1, 2))


def tr(T: PolyField) -> Poly3:
    return T.a[0][0] + T.a[1][1] + T.a[2][2]


def dev(T: PolyField) -> PolyField:
    t = tr(T) * Fraction(1, 3)
    out = T.a.copy()
    for i in range(3):
        out[i, i] = out[i, i] - t
    return PolyField(out)


def ident(u) -> PolyField:
    """u * id."""
    p = u.a.item() if isinstance(u, PolyField) else u
    return PolyField.tensor([[p if i == j else ZERO for j in range(3)]
                             for i in range(3)])


def cross(v: PolyField, w: PolyField) -> PolyField:
    v1, v2, v3 = v.a
    w1, w2, w3 = w.a
    return PolyField.vector([v2 * w3 - v3 * w2,
                             v3 * w1 - v1 * w3,
                             v1 * w2 - v2 * w1])


def dot(v: PolyField, w: PolyField) -> Poly3:
    return v.a[0] * w.a[0] + v.a[1] * w.a[1] + v.a[2] * w.a[2]


def matvec(T: PolyField, v: PolyField) -> PolyField:
    return PolyField.vector([sum((T.a[i][j] * v.a[j] for j in range(3)),
                                 start=ZERO) for i in range(3)])


# ---------------------------------------------------------------------------
# differential operators (exact)
# ---------------------------------------------------------------------------

def grad(u) -> PolyField:
    p = u.a.item() if isinstance(u, PolyField) else u
    return PolyField.vector([p.diff(i) for i in range(3)])


def div(v: PolyField) -> Poly3:
    return v.a[0].diff(0) + v.a[1].diff(1) + v.a[2].diff(2)


def curl(v: PolyField) -> PolyField:
    v1, v2, v3 = v.a
    return PolyField.vector([v3.diff(1) - v2.diff(2),
                             v1.diff(2) - v3.diff(0),
                             v2.diff(0) - v1.diff(1)])


def Grad(v: PolyField) -> PolyField:
    """Row i = grad(v_i)^T, i.e. (Grad v)_ij = d_j v_i."""
    return PolyField.tensor([[v.a[i].diff(j) for j in range(3)] for i in range(3)])


def Curl(T: PolyField) -> PolyField:
    """Row-wise curl: row i of Curl T = curl(row i of T)."""
    return PolyField.tensor([curl(PolyField.vector(T.a[i])).a for i in range(3)])


def Div(T: PolyField) -> PolyField:
    """Row-wise divergence."""
    return PolyField.vector([div(PolyField.vector(T.a[i])) for i in range(3)])


def gradgrad(u) -> PolyField:
    return Grad(grad(u))


def dev_grad(v: PolyField) -> PolyField:
    return dev(Grad(v))


def sym_grad(v: PolyField) -> PolyField:
    return sym(Grad(v))


def sym_curl(T: PolyField) -> PolyField:
    return sym(Curl(T))


def div_div(S: PolyField) -> Poly3:
    return div(Div(S))


def curl_curl_t(S: PolyField) -> PolyField:
    """Curl (Curl S)^T."""
    return Curl(Curl(S).T())


DIFF_OPS = {
    "grad": grad, "curl": curl, "div": div,
    "Grad": Grad, "Curl": Curl, "Div": Div,
    "gradgrad": gradgrad, "dev_grad": dev_grad, "sym_grad": sym_grad,
    "sym_curl": sym_curl, "div_div": div_div, "curl_curl_t": curl_curl_t,
}


def apply_op(name: str, field: PolyField):
    """Apply a named differential operator, checking shape compatibility."""
    scalar_ops = {"grad", "gradgrad"}
    vector_ops = {"curl", "div", "Grad", "dev_grad", "sym_grad"}
    tensor_ops = {"Curl", "Div", "sym_curl", "div_div", "curl_curl_t"}
    if name not in DIFF_OPS:
        raise ValueError(f"unknown operator {name!r}")
    shape = field.shape
    if name in scalar_ops and shape != ():
        raise ValueError(f"{name} needs a scalar field")
    if name in vector_ops and shape != (3,):
        raise ValueError(f"{name} needs a vector field")
    if name in tensor_ops and shape != (3, 3):
        raise ValueError(f"{name} needs a tensor field")
    out = DIFF_OPS[name](field)
    return PolyField.scalar(out) if isinstance(out, Poly3) else out


# ---------------------------------------------------------------------------
# seeded random fields (integer coefficients, exact)
# ---------------------------------------------------------------------------

def random_poly(rng: np.random.Generator, degree: int = 3, span: int = 5) -> Poly3:
    monos = [(a, b, c)
             for a in range(degree + 1)
             for b in range(degree + 1 - a)
             for c in range(degree + 1 - a - b)]
    out = Poly3()
    for m in monos:
        v = int(rng.integers(-span, span + 1))
        if v:
            out.c[m] = Fraction(v)
    return out


def random_scalar(rng, degree=3) -> PolyField:
    return PolyField.scalar(random_poly(rng, degree))


def random_vector(rng, degree=3) -> PolyField:
    return PolyField.vector([random_poly(rng, degree) for _ in range(3)])


def random_tensor(rng, degree=3, symmetric=False, tracefree=False) -> PolyField:
    rows = [[random_poly(rng, degree) for _ in range(3)] for _ in range(3)]
    T = PolyField.tensor(rows)
    if symmetric:
        T = sym(T)
    if tracefree:
        T = dev(T)
    return T
