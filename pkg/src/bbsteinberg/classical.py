"""Split tori, Weyl elements and root subgroups for classical groups.

Input is an extended Curtis-Tits configuration K_0..K_n of root SL2 (or PSL2)
subgroups.  The algorithm builds a commuting family of toral elements t_l
(one per node), Weyl elements w_l inverting them, seeds a root subgroup in
K_1 with the SL2 pipeline and propagates it along the diagram.

Propagation uses U_i = c U_{i-1} c^-1 with c = w_{i-1} w_i.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .blackbox import BlackBox, Element, SubBox, is_odd_order, matrix_box, slp_json
from .errors import (
    BudgetExceeded,
    EvenProduct,
    MissingJ,
    NotCentral,
    OppositeCorrectionFailed,
    PreconditionError,
    PropagationMismatch,
)
from .matgroup import GroupSpec, WhiteboxConfig, ct_config, oracle_in_block
from .sl2 import (
    RootSubgroup,
    SL2Triple,
    align_torus,
    find_involution,
    psl2_pipeline,
    toral_certificate,
)


def _commute(box: BlackBox, x: Element, y: Element) -> bool:
    return box.eq(box.mul(x, y), box.mul(y, x))


@dataclass
class CurtisTitsHandle:
    spec: GroupSpec
    box: BlackBox
    nodes: list[SubBox]
    quotients: list[BlackBox]  # node box modulo its central involution (if any)
    is_sl2: list[bool]
    central: list[Element | None]
    edges: frozenset
    j: Element | None = None
    config: WhiteboxConfig | None = None
    node_gen_slices: list[tuple[int, int]] = field(default_factory=list)

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def n(self) -> int:
        return self.spec.n

    def adjacent(self, a: int, b: int) -> bool:
        return frozenset((a, b)) in self.edges

    def in_node(self, x: Element, node: int) -> bool | None:
        """White-box block check, or None when no configuration is attached."""
        if self.config is None:
            return None
        return oracle_in_block(x.value, node, self.config)

    def check_configuration(self) -> list[str]:
        bad = []
        box = self.box
        for a in range(self.n + 1):
            for b in range(a + 1, self.n + 1):
                if not self.adjacent(a, b):
                    if not all(_commute(box, x, y) for x in self.nodes[a].gens for y in self.nodes[b].gens):
                        bad.append(f"[K{a}, K{b}] != 1")
        zs = [z for z in self.central if z is not None]
        for a in range(len(zs)):
            for b in range(a + 1, len(zs)):
                if not _commute(box, zs[a], zs[b]):
                    bad.append("central involutions do not commute")
        if self.family == "C" and self.j is not None:
            for l in range(1, self.n):
                if not all(_commute(box, self.j, g) for g in self.nodes[l].gens):
                    bad.append(f"j does not centralize K{l}")
        return bad


def central_involution(K: BlackBox, budget: int = 256) -> Element:
    """The central involution of an SL2 node; NotCentral for a PSL2 node."""
    z = find_involution(K, budget)
    if not all(_commute(K, z, g) for g in K.gens):
        raise NotCentral(f"{K.name}: involution is not central")
    return z


def make_handle(spec: GroupSpec, seed: int = 0, whitebox: bool = True) -> CurtisTitsHandle:
    """Black box for ``spec`` whose input generators are the K_l generators (and j)."""
    config = ct_config(spec)
    gens, slices = [], []
    for g in config.node_gens:
        slices.append((len(gens), len(gens) + len(g)))
        gens.extend(g)
    if config.j is not None:
        gens.append(config.j)
    box = matrix_box(spec, gens, seed=seed)
    nodes = [box.sub_box(box.gens[a:b], name=f"K{l}") for l, (a, b) in enumerate(slices)]
    central, quotients, flags = [], [], []
    for l, K in enumerate(nodes):
        try:
            z = central_involution(K)
        except NotCentral:
            z = None
        if (z is not None) != config.is_sl2[l]:
            raise AssertionError(f"node K{l}: SL2/PSL2 detection disagrees with configuration")
        central.append(z)
        flags.append(z is not None)
        quotients.append(K if z is None else K.sub_box(K.gens, center=[z], name=f"K{l}/<z>"))
    return CurtisTitsHandle(
        spec=spec,
        box=box,
        nodes=nodes,
        quotients=quotients,
        is_sl2=flags,
        central=central,
        edges=config.edges,
        j=box.gens[-1] if config.j is not None else None,
        config=config if whitebox else None,
        node_gen_slices=slices,
    )


# -- tori ------------------------------------------------------------------------


def centralizer_in_node(K: BlackBox, i: Element, budget: int = 256):
    """Stream of zeta1-images in C_K(i) for an (pseudo-)involution i normalizing K."""
    G = i.box
    h = (G.m + 1) // 2
    i_inv = G.inv(i)
    misses = 0
    while True:
        x = K.random()
        x = Element(G, x.ref, x.value)
        c = G.mul(i, G.conj(i_inv, x))
        if is_odd_order(c):
            misses = 0
            yield G.mul(G.pow(c, h), G.inv(x))
        else:
            misses += 1
            if misses >= budget:
                raise BudgetExceeded("centralizer_in_node", budget)


@dataclass
class SplitTorus:
    gens: list[Element]
    centralizing: list[str] = field(default_factory=list)

    def check(self, box: BlackBox) -> list[str]:
        bad = []
        for a in range(len(self.gens)):
            for b in range(a + 1, len(self.gens)):
                if not _commute(box, self.gens[a], self.gens[b]):
                    bad.append(f"[t{a}, t{b}] != 1")
        return bad


def _node_torus(handle: CurtisTitsHandle, node: int, i: Element, budget: int = 512) -> Element:
    """Toral generator of C_{K_node}(i), certified of order (q-1)/2 in the node quotient."""
    spec = handle.spec
    Kq = handle.quotients[node]
    stream = centralizer_in_node(handle.nodes[node], i)
    for _ in range(budget):
        c = next(stream)
        if toral_certificate(Kq, Element(Kq, c.ref, c.value), spec.p, spec.k, spec.k) is not None:
            return c
    raise BudgetExceeded(f"torus search in K{node}", budget)


def _torus_table(handle: CurtisTitsHandle) -> list[tuple[int, str, Element]]:
    """(node, label of centralized element, element) for every node."""
    n, fam, z = handle.n, handle.family, handle.central

    def inv(l):
        if z[l] is None:
            raise PreconditionError(f"node K{l} has no central involution")
        return (f"i{l}", z[l])

    rows = []
    for l in range(n + 1):
        if fam == "A":
            src = inv(1) if l == 0 else inv(2) if l == 1 else inv(l - 1)
        elif fam == "B":
            src = inv(2) if l in (0, 1) else inv(l - 1)
        elif fam == "C":
            if handle.j is None:
                raise MissingJ("type C configuration needs the element j")
            if l in (0, n):
                src = ("j", handle.j)
            elif n == 2:
                src = inv(0)
            else:
                src = inv(2) if l == 1 else inv(l - 1)
        else:
            src = inv(2) if l in (0, 1) else inv(n - 2) if l in (n - 1, n) else inv(l - 1)
        rows.append((l, src[0], src[1]))
    return rows


def build_torus(handle: CurtisTitsHandle, budget: int = 512) -> SplitTorus:
    gens, labels = [], []
    for l, label, elt in _torus_table(handle):
        gens.append(_node_torus(handle, l, elt, budget))
        labels.append(label)
    T = SplitTorus(gens, labels)
    bad = T.check(handle.box)
    if bad:
        raise AssertionError(f"torus generators do not commute: {bad}")
    return T


def _require(handle: CurtisTitsHandle, family: str):
    if handle.family != family:
        raise PreconditionError(f"expected a type {family} handle, got {handle.family}")


def build_torus_an(handle: CurtisTitsHandle, budget: int = 512) -> SplitTorus:
    _require(handle, "A")
    return build_torus(handle, budget)


def build_torus_bn(handle: CurtisTitsHandle, budget: int = 512) -> SplitTorus:
    _require(handle, "B")
    return build_torus(handle, budget)


def build_torus_cn(handle: CurtisTitsHandle, budget: int = 512) -> SplitTorus:
    _require(handle, "C")
    if handle.j is None:
        raise MissingJ("type C configuration needs the element j")
    return build_torus(handle, budget)


def build_torus_dn(handle: CurtisTitsHandle, budget: int = 512) -> SplitTorus:
    _require(handle, "D")
    return build_torus(handle, budget)


# -- Weyl elements ------------------------------------------------------------------


def torus_involution(handle: CurtisTitsHandle, node: int, t: Element) -> Element:
    """The (pseudo-)involution of <t> in the node quotient."""
    Kq = handle.quotients[node]
    return Kq.pow(Element(Kq, t.ref, t.value), (handle.spec.q - 1) // 4)


def weyl_element(handle: CurtisTitsHandle, node: int, t: Element, budget: int = 512) -> Element:
    from .blackbox import centralizer_sampler

    Kq = handle.quotients[node]
    G = handle.box
    i = torus_involution(handle, node, t)
    sampler = centralizer_sampler(i)
    t_inv = G.inv(t)
    for _ in range(budget):
        c = sampler.next()
        if Kq.is_one(c) or not Kq.is_one(Kq.mul(c, c)):
            continue
        w = Element(G, c.ref, c.value)
        if G.eq(G.conj(t, w), t_inv):
            return w
    raise BudgetExceeded(f"Weyl element search in K{node}", budget)


def weyl_elements(handle: CurtisTitsHandle, torus: SplitTorus, budget: int = 512) -> list[Element]:
    G = handle.box
    ws = [weyl_element(handle, l, t, budget) for l, t in enumerate(torus.gens)]
    for l, w in enumerate(ws):
        for tk in torus.gens:
            c = G.conj(tk, w)
            if not all(_commute(G, c, tj) for tj in torus.gens):
                raise AssertionError(f"w{l} does not normalize the torus")
    return ws


# -- roots -------------------------------------------------------------------------


def _align_node(handle: CurtisTitsHandle, node: int, triple: SL2Triple, t_target: Element,
                budget: int = 64) -> tuple[Element, SL2Triple]:
    """Conjugate the triple's torus onto <t_target>; returns (aligning element, triple)."""
    Kq = handle.quotients[node]
    target = torus_involution(handle, node, t_target)
    i_s = Element(Kq, triple.i.ref, triple.i.value)
    g_total = Kq.identity()
    for _ in range(budget):
        try:
            z = align_torus(Kq, i_s, target)
        except EvenProduct:
            g = Kq.random()
            i_s = Kq.conj(i_s, g)
            g_total = Kq.mul(g_total, g)
            continue
        return Kq.mul(g_total, z), triple
    raise BudgetExceeded(f"torus alignment in K{node}", budget)


def _node_root(handle: CurtisTitsHandle, node: int, t: Element, budget_scale: float = 1.0):
    """Run the SL2 pipeline in a node and move its root subgroup onto the torus <t>."""
    spec = handle.spec
    G = handle.box
    K = handle.nodes[node]
    triple = psl2_pipeline(K, spec.p, spec.k, budget_scale)
    g, _ = _align_node(handle, node, triple, t)
    g = Element(G, g.ref, g.value)
    u = G.conj(Element(G, triple.u.ref, triple.u.value), g)
    w = G.conj(Element(G, triple.w.ref, triple.w.value), g)
    U = [G.conj(Element(G, x.ref, x.value), g) for x in triple.U.gens]
    return triple, u, w, U


def seed_root(handle: CurtisTitsHandle, torus: SplitTorus, budget_scale: float = 1.0):
    """SL2 triple in K_1 aligned onto T_1: returns (triple, u1, w1, U1 gens)."""
    return _node_root(handle, 1, torus.gens[1], budget_scale)


def _check_root_gens(handle: CurtisTitsHandle, gens: list[Element], node: int, test_mode: bool):
    G, p = handle.box, handle.spec.p
    for x in gens:
        if G.is_one(x) or not G.is_one(G.pow(x, p)):
            raise PropagationMismatch(f"U{node}: generator is not unipotent")
        if test_mode and handle.in_node(x, node) is False:
            raise PropagationMismatch(f"U{node}: generator outside K{node}")


def _left_conj(G: BlackBox, x: Element, c: Element) -> Element:
    return G.mul(G.mul(c, x), G.inv(c))


def propagate_roots(handle: CurtisTitsHandle, weyl: list[Element], U1: list[Element],
                    chain: list[int] | None = None, close_cycle: bool | None = None,
                    test_mode: bool = True) -> dict[int, list[Element]]:
    """U_i = c U_{i-1} c^-1 with c = w_{i-1} w_i along ``chain``; optionally U_0 from U_n."""
    G = handle.box
    n = handle.n
    if chain is None:
        chain = list(range(1, n + 1)) if handle.family == "A" else list(range(1, n))
    if close_cycle is None:
        close_cycle = handle.family == "A"
    roots = {chain[0]: list(U1)}
    for prev, cur in zip(chain, chain[1:]):
        c = G.mul(weyl[prev], weyl[cur])
        roots[cur] = [_left_conj(G, x, c) for x in roots[prev]]
        _check_root_gens(handle, roots[cur], cur, test_mode)
    if close_cycle:
        g = G.mul(G.mul(weyl[0], weyl[n]), weyl[0])
        roots[0] = [_left_conj(G, x, g) for x in roots[n]]
        _check_root_gens(handle, roots[0], 0, test_mode)
    return roots


def _extra_neighbor(family: str, n: int, node: int) -> int:
    if node == 0:
        return 1 if family == "C" else 2
    return n - 2 if family == "D" else n - 1


def extra_roots_bcd(handle: CurtisTitsHandle, torus: SplitTorus, weyl: list[Element],
                    roots: dict[int, list[Element]], budget_scale: float = 1.0,
                    force_opposite: bool = False, stats: Counter | None = None):
    """Root subgroups for K_0 and K_n, choosing the sign that commutes with the neighbour root."""
    if handle.family not in ("B", "C", "D"):
        raise PreconditionError("extra roots are only needed for types B, C, D")
    G = handle.box
    n = handle.n
    out = {}
    triples = {}
    for node in (0, n):
        triple, u, w, U = _node_root(handle, node, torus.gens[node], budget_scale)
        triples[node] = triple
        if force_opposite:
            U = [G.conj(x, w) for x in U]
        nb = roots[_extra_neighbor(handle.family, n, node)]
        if not all(_commute(G, x, y) for x in U for y in nb):
            if stats is not None:
                stats[f"opposite_correction_K{node}"] += 1
            U = [G.conj(x, w) for x in U]
            if not all(_commute(G, x, y) for x in U for y in nb):
                raise OppositeCorrectionFailed(f"neither root subgroup in K{node} commutes with its neighbour")
        _check_root_gens(handle, U, node, test_mode=handle.config is not None)
        out[node] = U
    return out[0], out[n], triples


# -- certificate ---------------------------------------------------------------------


@dataclass
class SteinbergCertificate:
    handle: CurtisTitsHandle
    torus: SplitTorus
    weyl: list[Element]
    roots: list[list[Element]]
    seed: SL2Triple
    extra: dict = field(default_factory=dict)
    stats: Counter = field(default_factory=Counter)
    transcript: object = None

    def root_subgroup(self, node: int) -> RootSubgroup:
        spec = self.handle.spec
        Kq = self.handle.quotients[node]
        gens = [Element(Kq, x.ref, x.value) for x in self.roots[node]]
        return RootSubgroup(Kq, gens, spec.p, spec.k)

    def to_json(self) -> dict:
        h = self.handle
        G = h.box
        named: dict[str, Element] = {}
        for l in range(h.n + 1):
            a, b = h.node_gen_slices[l]
            for r, g in enumerate(G.gens[a:b]):
                named[f"K{l}.gen{r}"] = g
            if h.central[l] is not None:
                named[f"K{l}.i"] = h.central[l]
            named[f"K{l}.t"] = self.torus.gens[l]
            named[f"K{l}.w"] = self.weyl[l]
            for r, x in enumerate(self.roots[l]):
                named[f"K{l}.U{r}"] = x
        s = self.seed
        for name in ("u", "t", "w"):
            named[f"seed.{name}"] = getattr(s, name)
        doc = slp_json(G, named)
        spec = h.spec
        doc["group"] = str(spec)
        doc["family"], doc["n"], doc["p"], doc["k"] = spec.family, spec.n, spec.p, spec.k
        doc["nodes"] = [
            {
                "index": l,
                "sl2": h.is_sl2[l],
                "torus_centralizes": self.torus.centralizing[l],
                "roots": [f"K{l}.U{r}" for r in range(len(self.roots[l]))],
            }
            for l in range(h.n + 1)
        ]
        if self.transcript is not None:
            doc["transcript"] = self.transcript.to_json()
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def check_classical_preconditions(spec: GroupSpec):
    q = spec.q
    if q % 4 != 1:
        raise PreconditionError(f"q = {q} must be 1 mod 4")
    if spec.family == "A":
        if spec.n < 2:
            raise PreconditionError("type A needs rank >= 2 (use the SL2 pipeline for rank 1)")
        if q <= 3:
            raise PreconditionError("type A needs q > 3")
    elif q <= 5:
        raise PreconditionError(f"type {spec.family} needs q > 5")


def algorithm_classical(handle: CurtisTitsHandle, budget_scale: float = 1.0,
                        force_opposite: bool = False, verify: bool = True) -> SteinbergCertificate:
    spec = handle.spec
    check_classical_preconditions(spec)
    stats: Counter = Counter()
    builders = {"A": build_torus_an, "B": build_torus_bn, "C": build_torus_cn, "D": build_torus_dn}
    torus = builders[spec.family](handle)
    weyl = weyl_elements(handle, torus)
    seed, u1, w1, U1 = seed_root(handle, torus, budget_scale)
    stats.update({f"seed.{k}": v for k, v in seed.stats.items()})
    test_mode = handle.config is not None
    roots = propagate_roots(handle, weyl, U1, test_mode=test_mode)
    extra = {}
    if spec.family in ("B", "C", "D"):
        U0, Un, extra = extra_roots_bcd(handle, torus, weyl, roots, budget_scale, force_opposite, stats)
        roots[0], roots[spec.n] = U0, Un
    cert = SteinbergCertificate(
        handle=handle,
        torus=torus,
        weyl=weyl,
        roots=[roots[l] for l in range(spec.n + 1)],
        seed=seed,
        extra=extra,
        stats=stats,
    )
    if verify:
        from .verify import verify_certificate

        cert.transcript = verify_certificate(cert)
    return cert


def run_classical(spec: GroupSpec, seed: int = 0, budget_scale: float = 1.0, whitebox: bool = True) -> SteinbergCertificate:
    check_classical_preconditions(spec)
    return algorithm_classical(make_handle(spec, seed, whitebox), budget_scale)
