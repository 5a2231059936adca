"""Brute-force oracles, assertion transcripts and statistics experiments."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import stats as sps

from .blackbox import BlackBox, Element, matrix_box, replay_steps
from .errors import CapExceeded, ClosureTooLarge, PreconditionError
from .matgroup import GroupSpec, MatrixBackend, classical_generators, exponent_bound, oracle_in_block, oracle_is_toral, oracle_is_unipotent
from .arith import two_adic_split

# -- enumeration -----------------------------------------------------------------


def group_order(spec: GroupSpec) -> int:
    q, n = spec.q, spec.n
    if spec.family == "A":
        N = n + 1
        order = q ** (N * (N - 1) // 2)
        for i in range(2, N + 1):
            order *= q**i - 1
        if spec.quotient == "center":
            order //= math.gcd(N, q - 1)
        return order
    if spec.family in ("B", "C"):
        order = q ** (n * n)
        for i in range(1, n + 1):
            order *= q ** (2 * i) - 1
        if spec.family == "B" or spec.quotient == "center":
            order //= 2
        return order
    order = q ** (n * (n - 1)) * (q**n - 1)
    for i in range(1, n):
        order *= q ** (2 * i) - 1
    order //= 2
    if spec.quotient == "center":
        order //= math.gcd(4, q**n - 1) // 2
    return order


@dataclass
class EnumeratedGroup:
    spec: GroupSpec
    elements: np.ndarray  # (N, d, d) canonical representatives
    backend: MatrixBackend
    _index: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.elements)

    def index(self, M: np.ndarray) -> int:
        return self._index[self.backend.key(M)]

    def mul(self, a: int, b: int) -> int:
        return self.index(self.backend.mul(self.elements[a], self.elements[b]))

    def __iter__(self):
        return iter(self.elements)


def closure(backend: MatrixBackend, gens: list[np.ndarray], cap: int = 10**6) -> np.ndarray:
    """All elements of <gens> (canonical reps), by batched breadth-first search."""
    d = backend.dim
    ident = backend.canonical(backend.identity)
    seen = {ident.tobytes()}
    found = [ident[None]]
    frontier = ident[None]
    G = np.stack(gens) if gens else np.zeros((0, d, d), dtype=np.int64)
    F = backend.field
    while len(frontier):
        prods = F.matmul(frontier[:, None], G[None]).reshape(-1, d, d)
        prods = backend.canonical_batch(prods)
        new = []
        for M in prods:
            kb = M.tobytes()
            if kb not in seen:
                seen.add(kb)
                new.append(M)
                if len(seen) > cap:
                    raise CapExceeded(f"closure exceeds {cap} elements")
        frontier = np.stack(new) if new else np.zeros((0, d, d), dtype=np.int64)
        if new:
            found.append(frontier)
    return np.concatenate(found)


def enumerate_group(spec: GroupSpec, cap: int = 10**6, gens: list[np.ndarray] | None = None) -> EnumeratedGroup:
    backend = MatrixBackend(spec)
    if gens is None:
        gens = classical_generators(spec)
        if group_order(spec) > cap:
            raise CapExceeded(f"|{spec}| = {group_order(spec)} exceeds cap {cap}")
    els = closure(backend, gens, cap)
    index = {M.tobytes(): i for i, M in enumerate(els)}
    return EnumeratedGroup(spec, els, backend, index)


def __getattr__(name):
    # ``verify.enumerate`` without shadowing the builtin inside this module
    if name == "enumerate":
        return enumerate_group
    raise AttributeError(name)


def oracle_proportion(G: EnumeratedGroup, predicate: Callable[[np.ndarray], bool]) -> Fraction:
    count = sum(1 for M in G.elements if predicate(M))
    return Fraction(count, len(G))


def _order_predicates(G: EnumeratedGroup):
    B = G.backend
    _, m = two_adic_split(exponent_bound(G.spec))
    p = G.spec.p

    def has_order_p(x):
        return not B.is_identity(x) and B.is_identity(B.pow(x, p))

    def odd_order(x):
        return B.is_identity(B.pow(x, m))

    return has_order_p, odd_order


def involutions(G: EnumeratedGroup) -> list[int]:
    B = G.backend
    return [a for a, M in enumerate(G.elements) if not B.is_identity(M) and B.is_identity(B.mul(M, M))]


def unipotent_product_proportion(G: EnumeratedGroup, i: np.ndarray | None = None) -> Fraction:
    """Exact proportion of g with o(i i^g) = p, for a fixed involution i."""
    B = G.backend
    if i is None:
        i = G.elements[involutions(G)[0]]
    has_order_p, _ = _order_predicates(G)
    return oracle_proportion(G, lambda g: has_order_p(B.mul(i, B.mul(B.inv(g), B.mul(i, g)))))


def commuting_involution_pair(G: EnumeratedGroup) -> tuple[np.ndarray, np.ndarray]:
    B = G.backend
    inv = involutions(G)
    i = G.elements[inv[0]]
    for a in inv[1:]:
        j = G.elements[a]
        if B.eq(B.mul(i, j), B.mul(j, i)):
            return i, j
    raise ValueError("no commuting pair of involutions")


def odd_product_proportion(G: EnumeratedGroup, pair=None) -> Fraction:
    """Exact proportion of g with o(i j^g) odd, for a commuting pair i != j."""
    B = G.backend
    i, j = pair if pair is not None else commuting_involution_pair(G)
    _, odd_order = _order_predicates(G)
    return oracle_proportion(G, lambda g: odd_order(B.mul(i, B.mul(B.inv(g), B.mul(j, g)))))


def torus_pair_proportion(G: EnumeratedGroup) -> Fraction:
    """Pairs of involutions (i, j) with ij in a torus of odd order a = (q+-1)/2,
    counted once per such torus, over (number of involutions)^2.

    Each cyclic subgroup T of order a contributes the square of the number of
    involutions of N(T), all of which invert T.
    """
    B = G.backend
    q = G.spec.q
    a = (q - 1) // 2 if ((q - 1) // 2) % 2 == 1 else (q + 1) // 2
    inv = [G.elements[r] for r in involutions(G)]
    tori = {}
    for M in G.elements:
        # generators of order exactly a; a is odd so x^a = 1 and x^d != 1 for d | a, d < a
        if not B.is_identity(B.pow(M, a)):
            continue
        if any(B.is_identity(B.pow(M, d)) for d in range(1, a) if a % d == 0):
            continue
        T = []
        x = M
        for _ in range(a):
            T.append(x)
            x = B.mul(x, M)
        key = frozenset(B.key(y) for y in T)
        if key not in tori:
            tori[key] = M
    total = 0
    for M in tori.values():
        inverting = sum(1 for j in inv if B.eq(B.mul(j, B.mul(M, j)), B.inv(M)))
        total += inverting**2
    return Fraction(total, len(inv) ** 2)


def lemma_unipotent_value(q: int) -> Fraction:
    return Fraction(4 * (q - 1), q * (q + 1))


def lemma_odd_product_value(q: int) -> Fraction:
    b = (q - 1) // 2 if ((q - 1) // 2) % 2 == 0 else (q + 1) // 2
    return Fraction(b, q)


# -- assertion transcripts ------------------------------------------------------------


@dataclass
class Assertion:
    description: str
    family: str
    kind: str  # eq | neq | member | nonmember | oracle | closure
    refs: list[int]
    center: list[int]
    passed: bool
    extra: dict = field(default_factory=dict)


class AssertionTranscript:
    """Checked equalities over a shared program, replayable on the backend."""

    def __init__(self, box: BlackBox, spec: GroupSpec | None = None):
        self.box = box
        self.spec = spec
        self.entries: list[Assertion] = []

    @staticmethod
    def _center(box: BlackBox) -> list[int]:
        return [z.ref for z in getattr(box, "center_elements", [])]

    def _add(self, desc, family, kind, refs, center, ok, **extra) -> bool:
        self.entries.append(Assertion(desc, family, kind, list(refs), list(center), bool(ok), extra))
        return bool(ok)

    def eq(self, desc: str, family: str, a: Element, b: Element, box: BlackBox | None = None) -> bool:
        box = box or self.box
        return self._add(desc, family, "eq", [a.ref, b.ref], self._center(box), box.raw_eq(a.value, b.value))

    def neq(self, desc: str, family: str, a: Element, b: Element, box: BlackBox | None = None) -> bool:
        box = box or self.box
        return self._add(desc, family, "neq", [a.ref, b.ref], self._center(box), not box.raw_eq(a.value, b.value))

    def commute(self, desc, family, a, b, box=None) -> bool:
        box = box or self.box
        return self.eq(desc, family, box.mul(a, b), box.mul(b, a), box)

    def is_one(self, desc, family, a, box=None) -> bool:
        box = box or self.box
        return self.eq(desc, family, a, box.identity(), box)

    def not_one(self, desc, family, a, box=None) -> bool:
        box = box or self.box
        return self.neq(desc, family, a, box.identity(), box)

    def member(self, desc, family, x, U, expect: bool = True) -> bool:
        try:
            inside = U.contains(x)
        except ClosureTooLarge:
            inside = None
        ok = inside is expect
        kind = "member" if expect else "nonmember"
        refs = [x.ref] + [g.ref for g in U.gens]
        return self._add(desc, family, kind, refs, self._center(U.box), ok, p=U.p, q=U.q)

    def oracle(self, desc, family, x, name: str, result: bool, **extra) -> bool:
        return self._add(desc, family, "oracle", [x.ref], [], result, oracle=name, **extra)

    def closure_size(self, desc, family, gens, expected: int, size: int | None) -> bool:
        return self._add(desc, family, "closure", [g.ref for g in gens], [], size == expected, expected=expected, size=size)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[Assertion]:
        return [e for e in self.entries if not e.passed]

    def failed_families(self) -> set[str]:
        return {e.family for e in self.entries if not e.passed}

    def to_json(self) -> dict:
        roots = sorted({r for e in self.entries for r in e.refs + e.center})
        steps, idx = self.box.slp.to_steps(roots)
        remap = dict(zip(roots, idx))
        return {
            "steps": steps,
            "assertions": [
                {
                    "description": e.description,
                    "family": e.family,
                    "kind": e.kind,
                    "refs": [remap[r] for r in e.refs],
                    "center": [remap[r] for r in e.center],
                    "pass": e.passed,
                    **{k: v for k, v in e.extra.items()},
                }
                for e in self.entries
            ],
            "passed": self.passed,
        }


def replay_transcript(doc: dict, spec: GroupSpec, gens: list[np.ndarray], config=None) -> list[bool]:
    """Re-evaluate every recorded assertion from its program; returns pass flags."""
    B = MatrixBackend(spec)
    vals = replay_steps(doc["steps"], gens, B.mul, B.inv, B.pow)

    def eq(a, b, center):
        if B.eq(a, b):
            return True
        return any(B.eq(a, B.mul(b, vals[z])) for z in center)

    def key(v, center):
        return min([B.key(v)] + [B.key(B.mul(v, vals[z])) for z in center])

    out = []
    for a in doc["assertions"]:
        kind, refs, center = a["kind"], a["refs"], a["center"]
        if kind == "eq":
            out.append(eq(vals[refs[0]], vals[refs[1]], center))
        elif kind == "neq":
            out.append(not eq(vals[refs[0]], vals[refs[1]], center))
        elif kind in ("member", "nonmember"):
            gens_v = [vals[r] for r in refs[1:]]
            try:
                keys = {key(M, center) for M in _small_closure(B, gens_v, center, a["q"], key)}
                inside = key(vals[refs[0]], center) in keys
            except ClosureTooLarge:
                inside = None
            out.append(inside is (kind == "member"))
        elif kind == "oracle":
            x = vals[refs[0]]
            name = a["oracle"]
            if name == "unipotent":
                out.append(oracle_is_unipotent(x, spec))
            elif name == "toral":
                out.append(oracle_is_toral(x, spec))
            elif name == "in_node" and config is not None:
                out.append(oracle_in_node(x, a["node"], spec, config))
            else:
                out.append(a["pass"])
        elif kind == "closure":
            try:
                size = len(closure(B, [vals[r] for r in refs], cap=a["expected"]))
            except CapExceeded:
                size = None
            out.append(size == a["expected"])
        else:
            raise ValueError(f"unknown assertion kind {kind!r}")
    return out


def _small_closure(B, gens, center, cap, key):
    seen = {key(B.identity, center): B.identity}
    frontier = [B.identity]
    while frontier:
        nxt = []
        for v in frontier:
            for g in gens:
                w = B.mul(v, g)
                k = key(w, center)
                if k not in seen:
                    seen[k] = w
                    nxt.append(w)
                    if len(seen) > cap:
                        raise ClosureTooLarge("closure too large")
        frontier = nxt
    return list(seen.values())


# -- SL2 triples ------------------------------------------------------------------------

GENERATION_CAP = 100_000


def verify_sl2_triple(triple, spec: GroupSpec | None = None, generation_cap: int = GENERATION_CAP) -> AssertionTranscript:
    box = triple.box
    exact = box.root if triple.center is not None else box
    T = AssertionTranscript(box.root, spec)
    u, t, w, p = triple.u, triple.t, triple.w, triple.p
    T.not_one("u != 1", "unipotent", u, box)
    T.is_one("u^p = 1", "unipotent", exact.pow(u, p), exact)
    T.eq("t^w = t^-1", "torus_inversion", box.conj(t, w), box.inv(t), box)
    T.member("u^t in U", "root_normalized", box.conj(u, t), triple.U)
    T.member("u^w not in U", "root_opposite", box.conj(u, w), triple.U, expect=False)
    w2 = exact.mul(w, w)
    if exact.raw_eq(w2.value, exact.identity_value):
        T.is_one("w^2 = 1", "weyl_square", w2, exact)
    elif triple.center is not None:
        T.eq("w^2 = z (central involution)", "weyl_square", w2, triple.center, exact)
    else:
        T.is_one("w^2 = 1", "weyl_square", w2, exact)
    if spec is not None:
        T.oracle("u is a transvection", "in_node", u, "unipotent", oracle_is_unipotent(u.value, spec))
        order = group_order(spec)
        if order <= generation_cap:
            gens = [u, exact.conj(u, w), t]
            try:
                size = len(closure(MatrixBackend(spec), [g.value for g in gens], cap=order))
            except CapExceeded:
                size = None
            T.closure_size("<u, u^w, t> = G", "generation", gens, order, size)
    return T


# -- Steinberg certificates -------------------------------------------------------------


FAMILIES = (
    "torus_commuting",
    "torus_inversion",
    "weyl_normalizes_torus",
    "roots_unipotent",
    "root_normalized",
    "root_opposite",
    "nonadjacent_commute",
    "in_node",
)


NODE_CLOSURE_CAP = 20_000


@functools.lru_cache(maxsize=64)
def _node_keys(spec_str: str, node: int) -> frozenset | None:
    """Keys of every element of K_node, or None when the node is too large to list."""
    from .matgroup import ct_config

    spec = GroupSpec.parse(spec_str)
    B = MatrixBackend(spec)
    try:
        elts = closure(B, ct_config(spec).node_gens[node], cap=NODE_CLOSURE_CAP)
    except CapExceeded:
        return None
    return frozenset(B.key(M) for M in elts)


def oracle_in_node(M: np.ndarray, node: int, spec: GroupSpec, config) -> bool:
    """Exact membership in K_node when it is small enough to list, else the block-shape test."""
    keys = _node_keys(str(spec), node)
    if keys is None:
        return oracle_in_block(M, node, config)
    return MatrixBackend(spec).key(M) in keys


def verify_certificate(cert, backend=None) -> AssertionTranscript:
    h = cert.handle
    G = h.box
    spec = h.spec
    T = AssertionTranscript(G, spec)
    ts, ws, roots = cert.torus.gens, cert.weyl, cert.roots
    n = h.n
    for a in range(n + 1):
        for b in range(a + 1, n + 1):
            T.commute(f"[t{a}, t{b}] = 1", "torus_commuting", ts[a], ts[b])
    for l in range(n + 1):
        T.eq(f"t{l}^w{l} = t{l}^-1", "torus_inversion", G.conj(ts[l], ws[l]), G.inv(ts[l]))
        for k in range(n + 1):
            c = G.conj(ts[k], ws[l])
            for j in range(n + 1):
                T.commute(f"t{k}^w{l} commutes with t{j}", "weyl_normalizes_torus", c, ts[j])
    for l in range(n + 1):
        U = cert.root_subgroup(l)
        Kq = U.box
        for r, x in enumerate(roots[l]):
            T.not_one(f"U{l}[{r}] != 1", "roots_unipotent", x)
            T.is_one(f"U{l}[{r}]^p = 1", "roots_unipotent", G.pow(x, spec.p))
        u = Element(Kq, roots[l][0].ref, roots[l][0].value)
        for k in range(n + 1):
            tk = Element(Kq, ts[k].ref, ts[k].value)
            T.member(f"u{l}^t{k} in U{l}", "root_normalized", Kq.conj(u, tk), U)
        wl = Element(Kq, ws[l].ref, ws[l].value)
        T.member(f"u{l}^w{l} not in U{l}", "root_opposite", Kq.conj(u, wl), U, expect=False)
    for a in range(n + 1):
        for b in range(a + 1, n + 1):
            if h.adjacent(a, b):
                continue
            for x in roots[a]:
                for y in roots[b]:
                    T.commute(f"[U{a}, U{b}] = 1", "nonadjacent_commute", x, y)
    if h.config is not None:
        for l in range(n + 1):
            for x in roots[l]:
                T.oracle(f"U{l} generator in K{l}", "in_node", x, "in_node", oracle_in_node(x.value, l, spec, h.config), node=l)
                T.oracle(f"U{l} generator unipotent", "in_node", x, "unipotent", oracle_is_unipotent(x.value, spec))
            T.oracle(f"t{l} in K{l}", "in_node", ts[l], "in_node", oracle_in_node(ts[l].value, l, spec, h.config), node=l)
            T.oracle(f"t{l} toral", "in_node", ts[l], "toral", oracle_is_toral(ts[l].value, spec))
            T.oracle(f"w{l} in K{l}", "in_node", ws[l], "in_node", oracle_in_node(ws[l].value, l, spec, h.config), node=l)
    return T


def inject_fault(cert, family: str, seed: int = 0):
    """Copy of ``cert`` with one deliberate violation of ``family``.

    Node 1 is the default victim; the nonadjacent fault needs a node pair
    that is not joined in the (extended) diagram.
    """
    import dataclasses
    import random

    if family not in FAMILIES:
        raise ValueError(f"unknown invariant family {family!r}")
    h = cert.handle
    G = h.box
    n = h.n
    rng = random.Random(seed)
    ts = list(cert.torus.gens)
    ws = list(cert.weyl)
    roots = [list(r) for r in cert.roots]
    l = 1
    if family == "torus_commuting":
        ts[l] = G.mul(ts[l], roots[l][0])
    elif family == "torus_inversion":
        ws[l] = roots[l][0]
    elif family == "weyl_normalizes_torus":
        ws[l] = G.mul(ws[l], roots[l][0])
    elif family == "roots_unipotent":
        roots[l][0] = ts[l]
    elif family == "root_normalized":
        K = h.nodes[l]
        for _ in range(64):
            g = K.random()
            gens = [G.conj(x, Element(G, g.ref, g.value)) for x in roots[l]]
            # t_l normalizes <x> iff x commutes with x^t_l (unipotents of SL2)
            y = G.conj(gens[0], ts[l])
            if not G.eq(G.mul(gens[0], y), G.mul(y, gens[0])):
                break
        roots[l] = gens
    elif family == "root_opposite":
        ws[l] = G.identity()
    elif family == "nonadjacent_commute":
        pairs = [(a, b) for a in range(n + 1) for b in range(a + 1, n + 1) if not h.adjacent(a, b)]
        if not pairs:
            raise ValueError("every pair of nodes is joined; no commuting relation to break")
        a, b = pairs[rng.randrange(len(pairs))]
        roots[b] = [G.conj(x, ws[a]) for x in roots[a]]  # opposite of U_a sits in K_a
    else:  # in_node: move U_l into a neighbouring node's copy
        nb = next(c for c in range(n + 1) if h.adjacent(l, c))
        roots[l] = list(roots[nb])
    return dataclasses.replace(cert, torus=dataclasses.replace(cert.torus, gens=ts), weyl=ws, roots=roots,
                               transcript=None)


# -- statistics --------------------------------------------------------------------------

EXPERIMENTS = ("even-order-proportion", "unipotent-proportion", "odd-product-proportion", "zeta1-uniformity")


def _binomial_report(successes: int, trials: int) -> tuple[float, float]:
    f = successes / trials
    return f, math.sqrt(max(f * (1 - f), 1e-12) / trials)


def stats_run(experiment: str, trials: int, seed: int = 0, group: str | None = None) -> dict:
    from .blackbox import centralizer_sampler, is_odd_order
    from .sl2 import build_klein_four, find_involution, quotient_if_central

    if experiment not in EXPERIMENTS:
        raise PreconditionError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    if trials < 1:
        raise PreconditionError("trials must be positive")
    if group is None:
        group = "PSL:1:5:1" if experiment == "zeta1-uniformity" else "PSL:1:13:1"
    spec = GroupSpec.parse(group)
    if spec.family != "A" or spec.n != 1:
        raise PreconditionError("statistics experiments run on (P)SL2 groups")
    box = matrix_box(spec, seed=seed)
    report: dict = {"experiment": experiment, "group": str(spec), "seed": seed, "trials": trials}
    q, p = spec.q, spec.p

    if experiment == "even-order-proportion":
        hits = sum(0 if is_odd_order(box.random()) else 1 for _ in range(trials))
        f, s = _binomial_report(hits, trials)
        report.update(successes=hits, frequency=f, sigma=s, target="1/4", target_kind="lower bound",
                      passed=f >= 0.25 - 3 * s)
        return report

    i = find_involution(box)
    work, _ = quotient_if_central(box, i)
    if work is not box:
        i = find_involution(work)

    if experiment == "unipotent-proportion":
        i_inv = work.inv(i)
        hits = 0
        for _ in range(trials):
            g = work.random()
            u = work.mul(i, work.conj(i_inv, g))
            hits += (not work.is_one(u)) and work.is_one(work.pow(u, p))
        target = lemma_unipotent_value(q)
        f, s = _binomial_report(hits, trials)
        report.update(successes=hits, frequency=f, sigma=s, target=str(target), target_kind="exact",
                      passed=abs(f - float(target)) <= 3 * s)
        return report

    if experiment == "odd-product-proportion":
        V = build_klein_four(work, i, p, spec.k)
        hits = 0
        for _ in range(trials):
            g = work.random()
            hits += is_odd_order(work.mul(V.i1, work.conj(V.i2, g)))
        # b/q bounds the odd-order probability from below; it is not its exact value
        target = lemma_odd_product_value(q)
        f, s = _binomial_report(hits, trials)
        report.update(successes=hits, frequency=f, sigma=s, target=str(target), target_kind="lower bound",
                      passed=f >= float(target) - 3 * s)
        return report

    # zeta1-uniformity: bins are the elements of C(i), enumerated by brute force
    Gq = enumerate_group(GroupSpec(spec.family, spec.n, spec.p, spec.k, "center"))
    B = Gq.backend
    iv = i.value
    cent = [M for M in Gq.elements if B.eq(B.mul(M, iv), B.mul(iv, M))]
    bins = {B.key(M): a for a, M in enumerate(cent)}
    counts = np.zeros(len(cent), dtype=np.int64)
    sampler = centralizer_sampler(i)
    for _ in range(trials):
        counts[bins[B.key(sampler.next().value)]] += 1
    chi2, pval = sps.chisquare(counts)
    report.update(bins=len(cent), counts=counts.tolist(), chi2=float(chi2), p_value=float(pval),
                  significance=0.001, passed=bool(pval >= 0.001), target="uniform on C(i)")
    return report
