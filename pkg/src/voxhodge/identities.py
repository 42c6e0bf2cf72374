"""Catalogue of exact identities coupling matrix algebra with the classical
differential operators, verified on random polynomial fields.

Every identity is polynomial in the field coefficients, so holding exactly on
random integer-coefficient fields of degree <= 3 (over enough trials) is a
legitimate proof-by-evaluation for the bilinear/linear forms involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from voxhodge.polynomial import (
    Curl, Div, Grad, PolyField, cross, curl, curl_curl_t, dev, dev_grad, div,
    div_div, grad, gradgrad, ident, matvec, random_scalar, random_tensor,
    random_vector, skw, spn, spn_inv, sym, sym_curl, sym_grad, tr,
)


def _zero(f) -> bool:
    if isinstance(f, PolyField):
        return f.is_zero()
    return not f  # Poly3


def _scalar_field(p) -> PolyField:
    return p if isinstance(p, PolyField) else PolyField.scalar(p)


# each entry: (name, sampler spec, callable(fields) -> list of zero-things)
def _catalogue():
    cat = []

    def add(name, needs, check):
        cat.append((name, needs, check))

    add("spn(v)w = v x w = -spn(w)v", "vw", lambda v, w: [
        matvec(spn(v), w) - cross(v, w),
        matvec(spn(v), w) + matvec(spn(w), v)])
    add("spn(v) spn_inv(S) = -S v for skew S", "vS", lambda v, S: [
        matvec(spn(v), spn_inv(skw(S))) + matvec(skw(S), v)])
    add("spn_inv(spn v) = v", "v", lambda v: [spn_inv(spn(v)) - v])
    add("sym spn v = 0", "v", lambda v: [sym(spn(v))])
    add("dev(u id) = 0", "u", lambda u: [dev(ident(u))])
    add("tr Grad v = div v", "v", lambda v: [
        _scalar_field(tr(Grad(v)) - div(v))])
    add("2 skw Grad v = spn curl v", "v", lambda v: [
        2 * skw(Grad(v)) - spn(curl(v))])
    add("Div(u id) = grad u", "u", lambda u: [Div(ident(u)) - grad(u)])
    add("Curl(u id) = -spn grad u", "u", lambda u: [
        Curl(ident(u)) + spn(grad(u))])
    add("curl Div(u id) = 0", "u", lambda u: [curl(Div(ident(u)))])
    add("curl spn_inv Curl(u id) = 0", "u", lambda u: [
        curl(spn_inv(Curl(ident(u))))])
    add("sym Curl(u id) = 0", "u", lambda u: [sym(Curl(ident(u)))])
    add("Div spn v = -curl v", "v", lambda v: [Div(spn(v)) + curl(v)])
    add("Div skw S = -curl spn_inv skw S", "S", lambda S: [
        Div(skw(S)) + curl(spn_inv(skw(S)))])
    add("div Div skw S = 0", "S", lambda S: [
        _scalar_field(div(Div(skw(S))))])
    add("Curl spn v = (div v) id - (Grad v)^T", "v", lambda v: [
        Curl(spn(v)) - ident(div(v)) + Grad(v).T()])
    add("dev Curl spn v = -(dev Grad v)^T", "v", lambda v: [
        dev(Curl(spn(v))) + dev_grad(v).T()])
    add("-2 Curl sym Grad v = 2 Curl skw Grad v = -(Grad curl v)^T", "v",
        lambda v: [2 * Curl(sym(Grad(v))) - Grad(curl(v)).T(),
                   2 * Curl(skw(Grad(v))) + Grad(curl(v)).T()])
    add("2 spn_inv skw Curl S = Div S^T - grad tr S", "S", lambda S: [
        2 * spn_inv(skw(Curl(S))) - Div(S.T()) + grad(tr(S))])
    add("curl Div S^T = 2 curl spn_inv skw Curl S", "S", lambda S: [
        curl(Div(S.T())) - 2 * curl(spn_inv(skw(Curl(S))))])
    add("2 skw Curl S = spn Div S^T for trace-free S", "S", lambda S: [
        2 * skw(Curl(dev(S))) - spn(Div(dev(S).T()))])
    add("tr Curl S = 2 div spn_inv skw S", "S", lambda S: [
        _scalar_field(tr(Curl(S)) - 2 * div(spn_inv(skw(S))))])
    add("tr Curl sym S = 0", "S", lambda S: [
        _scalar_field(tr(Curl(sym(S))))])
    add("2 (Grad spn_inv skw S)^T = (tr Curl skw S) id - 2 Curl skw S", "S",
        lambda S: [2 * Grad(spn_inv(skw(S))).T()
                   - ident(tr(Curl(skw(S)))) + 2 * Curl(skw(S))])
    add("3 Div(dev Grad v)^T = 2 grad div v", "v", lambda v: [
        3 * Div(dev_grad(v).T()) - 2 * grad(div(v))])
    add("2 Div sym Curl S = -2 Div skw Curl S = curl Div S^T", "S",
        lambda S: [2 * Div(sym_curl(S)) - curl(Div(S.T())),
                   2 * Div(skw(Curl(S))) + curl(Div(S.T()))])
    add("Curl(Curl sym S)^T = sym Curl(Curl S)^T", "S", lambda S: [
        Curl(Curl(sym(S)).T()) - sym(curl_curl_t(S))])
    add("Curl(Curl skw S)^T = skw Curl(Curl S)^T", "S", lambda S: [
        Curl(Curl(skw(S)).T()) - skw(curl_curl_t(S))])

    # complex properties of the four sequences, as exact polynomial identities
    add("sym_curl(dev_grad v) = 0", "v", lambda v: [sym_curl(dev_grad(v))])
    add("div_div(sym_curl T) = 0", "S", lambda S: [
        _scalar_field(div_div(sym_curl(dev(S))))])
    add("Curl(gradgrad u) = 0", "u", lambda u: [Curl(gradgrad(u))])
    add("Div(Curl S) = 0", "S", lambda S: [Div(Curl(S))])
    add("curl_curl_t(sym_grad v) = 0", "v", lambda v: [
        curl_curl_t(sym_grad(v))])
    add("Div(curl_curl_t S) = 0", "S", lambda S: [Div(curl_curl_t(sym(S)))])
    add("curl grad u = 0", "u", lambda u: [curl(grad(u))])
    add("div curl v = 0", "v", lambda v: [_scalar_field(div(curl(v)))])
    return cat


CATALOGUE = _catalogue()


@dataclass
class IdentityResult:
    name: str
    passed: bool
    trials: int
    counterexample: str = ""


def verify_identity_catalogue(seed: int = 0, degree: int = 3,
                              trials: int = 10) -> list[IdentityResult]:
    """Run every catalogued identity on `trials` random fields each.

    Differences must be exact zero polynomials; any failure carries the
    offending field in the result.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if degree > 3:
        raise ValueError("degree is capped at 3 (exact-arithmetic cost)")
    rng = np.random.default_rng(seed)
    results = []
    for name, needs, check in CATALOGUE:
        passed, witness = True, ""
        for _ in range(trials):
            fields = []
            for kind in needs:
                if kind == "u":
                    fields.append(random_scalar(rng, degree))
                elif kind == "v" or kind == "w":
                    fields.append(random_vector(rng, degree))
                else:
                    fields.append(random_tensor(rng, degree))
            outs = check(*fields)
            if not all(_zero(o) for o in outs):
                passed = False
                witness = "; ".join(repr(f.a.tolist()) for f in fields)
                break
        results.append(IdentityResult(name, passed, trials, witness))
    return results
