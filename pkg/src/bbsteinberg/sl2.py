"""Recognition of (P)SL2(q), q = 1 mod 4, in a black box.

The pipeline finds an involution i, a Klein four-group V = <i, j> with j
inverting a certified toral element t through i, an element x of order 3
permuting V, a subfield subgroup H = <t', x>, a unipotent u = i i^g in H and
finally the root subgroup U spanned by the t-conjugates of u.

For SL2(q) the unique involution is central; the pipeline then works in the
quotient box modulo that involution, where order-4 "pseudo-involutions" play
the role of involutions, and lifts u back to an element of order exactly p.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .arith import factor_small
from .blackbox import (
    BlackBox,
    Element,
    SubBox,
    centralizer_sampler,
    extract_involution,
    is_odd_order,
    slp_json,
)
from .errors import BudgetExceeded, ClosureTooLarge, EvenProduct, PreconditionError, SmallPrimeException

CLOSURE_CAP = 4096


def _check_q(p: int, k: int):
    q = p**k
    if q % 4 != 1:
        raise PreconditionError(f"q = {q} is not 1 mod 4")
    if q <= 3:
        raise PreconditionError("q must exceed 3")


def _commute(box: BlackBox, x: Element, y: Element) -> bool:
    return box.eq(box.mul(x, y), box.mul(y, x))


def _inverts(box: BlackBox, w: Element, t: Element) -> bool:
    return box.eq(box.conj(t, w), box.inv(t))


def _is_involution(box: BlackBox, x: Element) -> bool:
    return not box.is_one(x) and box.is_one(box.mul(x, x))


# -- involutions ---------------------------------------------------------------


def find_involution(box: BlackBox, budget: int = 256, stats: Counter | None = None) -> Element:
    """Involution from the first random element of even order."""
    for _ in range(budget):
        x = box.random()
        if stats is not None:
            stats["involution_draws"] += 1
        if not is_odd_order(x):
            return extract_involution(x)
    raise BudgetExceeded("find_involution", budget)


def is_central(box: BlackBox, x: Element) -> bool:
    return all(_commute(box, x, g) for g in box.gens)


def quotient_if_central(box: BlackBox, i: Element) -> tuple[BlackBox, Element | None]:
    """If i is central, return the box modulo <i>; else the box unchanged."""
    if is_central(box, i):
        return box.sub_box(box.gens, center=[i], name=f"{box.name}/<z>"), i
    return box, None


# -- toral certificate ------------------------------------------------------------


def choose_subfield_degree(p: int, k: int) -> int:
    """Least a | k with p^a = 1 mod 4 and p^a >= 13; raises SmallPrimeException."""
    for a in range(1, k + 1):
        if k % a == 0 and p**a % 4 == 1 and p**a >= 13:
            return a
    raise SmallPrimeException(f"no usable subfield of GF({p}^{k})")


@dataclass
class ToralCertificate:
    t: Element
    p: int
    k: int
    a: int
    checks: list[str] = field(default_factory=list)

    def recheck(self, box: BlackBox) -> bool:
        return toral_certificate(box, self.t, self.p, self.k, self.a) is not None


def toral_certificate(box: BlackBox, t: Element, p: int, k: int, a: int, i: Element | None = None,
                      trial_bound: int = 10**6) -> ToralCertificate | None:
    """Exponent identities certifying t as a large-order toral element.

    Checks, modulo the box center: t^((q-1)/2) = 1; if k > 1 then
    t^(prod_{i<k} (p^i - 1)) != 1; and s = t^((q-1)/(p^a-1)) has order
    exactly (p^a - 1)/2.  If ``i`` is given, also s^((p^a-1)/4) = i, which
    pins t to the torus through i.  Returns None if any identity fails.
    """
    q = p**k
    N = (q - 1) // 2
    checks = []
    if not box.is_one(box.pow(t, N)):
        return None
    checks.append(f"t^{N} = 1")
    if k > 1:
        P = 1
        for r in range(1, k):
            P *= p**r - 1
        if box.is_one(box.pow(t, P)):
            return None
        checks.append(f"t^{P} != 1")
    e = (q - 1) // (p**a - 1)
    s = box.pow(t, e)
    M = (p**a - 1) // 2
    if not box.is_one(box.pow(s, M)):
        return None
    for r in factor_small(M, trial_bound).primes:
        if box.is_one(box.pow(s, M // r)):
            return None
        checks.append(f"(t^{e})^{M // r} != 1")
    checks.append(f"(t^{e})^{M} = 1")
    if i is not None:
        if not box.eq(box.pow(s, M // 2), i):
            return None
        checks.append(f"(t^{e})^{M // 2} = i")
    return ToralCertificate(t, p, k, a, checks)


# -- Klein four-group ----------------------------------------------------------------


@dataclass
class KleinFourWitness:
    i1: Element
    i2: Element
    i3: Element
    t: Element
    certificate: ToralCertificate
    torus_involution_index: int = 1


def build_klein_four(box: BlackBox, i: Element, p: int, k: int, a: int | None = None,
                     budget: int = 512, stats: Counter | None = None) -> KleinFourWitness:
    """Sample C(i) for a certified toral t and an involution j inverting t."""
    _check_q(p, k)
    if a is None:
        a = k
    stats = stats if stats is not None else Counter()
    sampler = centralizer_sampler(i)
    cert = None
    for _ in range(budget):
        c = sampler.next()
        stats["toral_draws"] += 1
        cert = toral_certificate(box, c, p, k, a, i)
        if cert is not None:
            break
    if cert is None:
        raise BudgetExceeded("toral element search", budget)
    t = cert.t
    j = None
    for _ in range(budget):
        c = sampler.next()
        stats["weyl_draws"] += 1
        if _is_involution(box, c) and not box.eq(c, i) and _inverts(box, c, t):
            j = c
            break
    if j is None:
        raise BudgetExceeded("Weyl involution search", budget)
    V = KleinFourWitness(i, j, box.mul(i, j), t, cert)
    assert _commute(box, i, j) and _commute(box, i, t) and _inverts(box, j, t)
    return V


# -- order three element ---------------------------------------------------------------


def order_three_element(box: BlackBox, V: KleinFourWitness, budget: int = 256,
                        stats: Counter | None = None) -> Element:
    """x with i3^x = i2, i2^x = i1, i1^x = i3 (so x^3 = 1)."""
    stats = stats if stats is not None else Counter()
    h = (box.m + 1) // 2
    i1, i2, i3 = V.i1, V.i2, V.i3
    for _ in range(budget):
        g = box.random()
        stats["order3_draws"] += 1
        t1 = box.mul(i1, box.conj(i2, g))
        if not is_odd_order(t1):
            continue
        stats["order3_t1_odd"] += 1
        y = box.mul(g, box.inv(box.pow(t1, h)))
        kk = box.conj(i3, y)
        t2 = box.mul(i2, kk)
        if not is_odd_order(t2):
            continue
        x = box.mul(y, box.inv(box.pow(t2, h)))
        ok = (
            box.eq(box.conj(i3, x), i2)
            and box.eq(box.conj(i2, x), i1)
            and box.eq(box.conj(i1, x), i3)
            and box.is_one(box.pow(x, 3))
        )
        if not ok:
            raise AssertionError("order-three element does not permute the Klein four-group")
        return x
    raise BudgetExceeded("order_three_element", budget)


# -- subfield subgroup, unipotent, root subgroup ------------------------------------------


def subfield_subgroup(box: BlackBox, V: KleinFourWitness, x: Element, p: int, k: int) -> tuple[SubBox, int]:
    """H = <t', x> with t' = t^((q-1)/(p^a-1)); returns (H, a)."""
    a = choose_subfield_degree(p, k)
    t_sub = box.pow(V.t, (p**k - 1) // (p**a - 1))
    return box.sub_box([t_sub, x], name=f"H({p}^{a})"), a


def unipotent_search(H: BlackBox, i: Element, p: int, a: int, budget: int | None = None,
                     stats: Counter | None = None) -> Element:
    """u = i i^g != 1 with u^p = 1 for random g in H."""
    stats = stats if stats is not None else Counter()
    if budget is None:
        budget = 64 * p**a
    i = Element(H, i.ref, i.value)
    i_inv = H.inv(i)
    for _ in range(budget):
        g = H.random()
        stats["unipotent_draws"] += 1
        u = H.mul(i, H.conj(i_inv, g))
        if not H.is_one(u) and H.is_one(H.pow(u, p)):
            if not H.eq(H.conj(u, i), H.inv(u)):
                raise AssertionError("i does not invert the unipotent element")
            return u
    raise BudgetExceeded("unipotent_search", budget)


class RootSubgroup:
    """Root subgroup U given by generators, with a membership test.

    Membership is via a materialized closure when q <= CLOSURE_CAP, else via
    the predicate x^p = 1 and [x, u] = 1.
    """

    def __init__(self, box: BlackBox, gens: list[Element], p: int, k: int, materialize: bool = True):
        self.box, self.gens, self.p, self.k = box, gens, p, k
        self.q = p**k
        self._keys: set | None = None
        if materialize and self.q <= CLOSURE_CAP and box._key is not None:
            self._keys = self._closure()

    def _closure(self) -> set:
        box = self.box
        ident = box.identity_value
        keys = {box.raw_key(ident)}
        frontier = [ident]
        vals = [g.value for g in self.gens]
        while frontier:
            nxt = []
            for v in frontier:
                for g in vals:
                    w = box._mul(v, g)
                    kw = box.raw_key(w)
                    if kw not in keys:
                        keys.add(kw)
                        nxt.append(w)
                        if len(keys) > self.q:
                            raise ClosureTooLarge(f"root subgroup closure exceeds {self.q}")
            frontier = nxt
        return keys

    @property
    def size(self) -> int | None:
        return None if self._keys is None else len(self._keys)

    def contains(self, x: Element) -> bool:
        box = self.box
        if self._keys is not None:
            return box.raw_key(x.value) in self._keys
        if not box.is_one(box.pow(x, self.p)):
            return False
        return _commute(box, x, self.gens[0])

    __contains__ = contains


def root_subgroup(box: BlackBox, u: Element, t: Element, p: int, k: int) -> RootSubgroup:
    """U generated by u^(t^r), 0 <= r < k."""
    gens = [u]
    for _ in range(1, k):
        gens.append(box.conj(gens[-1], t))
    return RootSubgroup(box, gens, p, k)


# -- torus alignment ---------------------------------------------------------------------


def align_torus(box: BlackBox, i1: Element, i2: Element) -> Element:
    """z = (i1 i2)^((m+1)/2) with i1^z = i2; raises EvenProduct."""
    c = box.mul(i1, i2)
    if not is_odd_order(c):
        raise EvenProduct("product of involutions has even order")
    z = box.pow(c, (box.m + 1) // 2)
    if not box.eq(box.conj(i1, z), i2):
        raise AssertionError("alignment element does not conjugate i1 to i2")
    return z


# -- the pipeline ----------------------------------------------------------------------------


@dataclass
class SL2Triple:
    u: Element
    t: Element
    w: Element
    U: RootSubgroup
    box: BlackBox
    p: int
    k: int
    a: int
    i: Element
    x: Element
    certificate: ToralCertificate
    center: Element | None = None
    stats: Counter = field(default_factory=Counter)

    @property
    def U_gens(self) -> list[Element]:
        return self.U.gens

    def check(self) -> list[str]:
        """Names of violated invariants (empty when all hold)."""
        box, bad = self.box, []
        exact = self.box.root if self.center is not None else self.box
        if box.is_one(self.u) or not exact.is_one(exact.pow(self.u, self.p)):
            bad.append("u unipotent")
        if not _inverts(box, self.w, self.t):
            bad.append("t^w = t^-1")
        if not self.U.contains(box.conj(self.u, self.t)):
            bad.append("u^t in U")
        if self.U.contains(box.conj(self.u, self.w)):
            bad.append("u^w not in U")
        return bad

    def to_json(self) -> dict:
        named = {"u": self.u, "t": self.t, "w": self.w}
        named.update({f"U{r}": g for r, g in enumerate(self.U.gens)})
        doc = slp_json(self.box, named)
        doc["U_gens"] = [f"U{r}" for r in range(len(self.U.gens))]
        doc["toral_certificate"] = self.certificate.checks
        doc["field"] = {"p": self.p, "k": self.k, "subfield_degree": self.a}
        doc["quotient_by_center"] = self.center is not None
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def psl2_pipeline(box: BlackBox, p: int, k: int, budget_scale: float = 1.0) -> SL2Triple:
    """Find (u, t, w, U) in a black box encrypting (P)SL2(p^k)."""
    _check_q(p, k)
    q = p**k
    stats: Counter = Counter()

    def b(n: int) -> int:
        return max(1, int(n * budget_scale))

    i = find_involution(box, b(256), stats)
    work, z = quotient_if_central(box, i)
    if z is not None:
        i = find_involution(work, b(256), stats)
        if is_central(work, i):
            raise PreconditionError("no non-central involution: not (P)SL2")
    try:
        a = choose_subfield_degree(p, k)
        use_sub = a < k
    except SmallPrimeException:
        a, use_sub = k, False
    V = build_klein_four(work, i, p, k, a, b(512), stats)
    t = V.t
    x = order_three_element(work, V, b(256), stats)
    if use_sub:
        H, a = subfield_subgroup(work, V, x, p, k)
    else:
        H = work.sub_box(work.gens, name=f"H({p}^{k})")
    u = unipotent_search(H, i, p, a, b(64 * p**a), stats)
    u = Element(work, u.ref, u.value)
    if z is not None and not box.is_one(box.pow(u, p)):
        u = box.mul(u, z)
        u = Element(work, u.ref, u.value)
    U = root_subgroup(work, u, t, p, k)
    if U.size is not None and U.size != q:
        raise ClosureTooLarge(f"root subgroup has {U.size} elements, expected {q}")
    triple = SL2Triple(u=u, t=t, w=V.i2, U=U, box=work, p=p, k=k, a=a, i=i, x=x,
                       certificate=V.certificate, center=z, stats=stats)
    bad = triple.check()
    if bad:
        raise AssertionError(f"SL2 triple invariants violated: {bad}")
    return triple
