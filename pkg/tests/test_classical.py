import dataclasses
from collections import Counter

import pytest

from bbsteinberg.blackbox import Element
from bbsteinberg.classical import (
    algorithm_classical,
    build_torus,
    build_torus_an,
    build_torus_cn,
    central_involution,
    check_classical_preconditions,
    extra_roots_bcd,
    make_handle,
    propagate_roots,
    run_classical,
    seed_root,
    weyl_elements,
)
from bbsteinberg.errors import MissingJ, NotCentral, PreconditionError
from bbsteinberg.matgroup import GroupSpec, oracle_in_block, oracle_is_toral, oracle_is_unipotent
from bbsteinberg.sl2 import RootSubgroup

GROUPS = ["SL:3:13:1", "PSp:2:13:1", "Sp:3:13:1", "Omega:3:13:1", "OmegaPlus:4:13:1"]


def _commute(G, x, y):
    return G.eq(G.mul(x, y), G.mul(y, x))


@pytest.fixture(scope="module")
def sl4():
    h = make_handle(GroupSpec.parse("SL:3:13:1"), seed=3)
    T = build_torus(h)
    W = weyl_elements(h, T)
    return h, T, W


@pytest.mark.parametrize("s", GROUPS + ["SL:2:5:1", "PSL:3:13:1"])
def test_handle_configuration(s):
    h = make_handle(GroupSpec.parse(s), seed=1)
    assert h.check_configuration() == []
    assert len(h.nodes) == h.n + 1


def test_central_involution_not_central_in_psl2_node():
    h = make_handle(GroupSpec.parse("PSp:2:13:1"), seed=1)
    assert h.is_sl2 == [True, False, True]
    with pytest.raises(NotCentral):
        central_involution(h.nodes[1])


@pytest.mark.parametrize("s", GROUPS)
def test_torus(s):
    h = make_handle(GroupSpec.parse(s), seed=2)
    T = build_torus(h)
    G = h.box
    assert T.check(G) == []
    for l, t in enumerate(T.gens):
        assert oracle_in_block(t.value, l, h.config)
        assert oracle_is_toral(t.value, h.spec)
        assert not G.is_one(t)


def test_torus_builder_family_checked():
    h = make_handle(GroupSpec.parse("Sp:2:13:1"), seed=0)
    with pytest.raises(PreconditionError):
        build_torus_an(h)


def test_type_c_without_j():
    h = make_handle(GroupSpec.parse("Sp:2:13:1"), seed=0)
    h = dataclasses.replace(h, j=None)
    with pytest.raises(MissingJ):
        build_torus_cn(h)


@pytest.mark.parametrize("s", GROUPS)
def test_weyl_elements(s):
    h = make_handle(GroupSpec.parse(s), seed=5)
    T = build_torus(h)
    W = weyl_elements(h, T)
    G = h.box
    for l, (t, w) in enumerate(zip(T.gens, W)):
        assert G.eq(G.conj(t, w), G.inv(t))
        assert oracle_in_block(w.value, l, h.config)


def _braid_order(G, wa, wb, ts):
    x = G.mul(wa, wb)
    for m in (1, 2, 3, 4, 6):
        y = G.pow(x, m)
        if all(_commute(G, y, t) for t in ts):
            return m
    return None


@pytest.mark.parametrize("s", GROUPS)
def test_braid_surrogates(s):
    # (w_a w_b)^m lands in the torus for m = 2 (no bond), 3 (single), 4 (double)
    h = make_handle(GroupSpec.parse(s), seed=6)
    T = build_torus(h)
    W = weyl_elements(h, T)
    G = h.box
    for a in range(h.n + 1):
        for b in range(a + 1, h.n + 1):
            m = _braid_order(G, W[a], W[b], T.gens)
            if h.adjacent(a, b):
                assert m in (3, 4), (a, b, m)
            else:
                assert m == 2, (a, b, m)


def test_sl4_braid_orders_all_three(sl4):
    h, T, W = sl4
    for a in range(4):
        b = (a + 1) % 4
        assert _braid_order(h.box, W[a], W[b], T.gens) == 3


def test_propagation_sl4(sl4):
    h, T, W = sl4
    G, p = h.box, h.spec.p
    _, u1, _, U1 = seed_root(h, T)
    roots = propagate_roots(h, W, U1)
    assert sorted(roots) == [0, 1, 2, 3]
    for l, gens in roots.items():
        for x in gens:
            assert not G.is_one(x) and G.is_one(G.pow(x, p))
            assert oracle_in_block(x.value, l, h.config)
            assert oracle_is_unipotent(x.value, h.spec)


def _closure_keys(h, node, gens):
    Kq = h.quotients[node]
    U = RootSubgroup(Kq, [Element(Kq, x.ref, x.value) for x in gens], h.spec.p, h.spec.k)
    return U._keys


def test_backward_propagation_reproduces_u1(sl4):
    h, T, W = sl4
    _, _, _, U1 = seed_root(h, T)
    fwd = propagate_roots(h, W, U1, close_cycle=False)
    back = propagate_roots(h, W, fwd[h.n], chain=list(range(h.n, 0, -1)), close_cycle=False)
    assert _closure_keys(h, 1, back[1]) == _closure_keys(h, 1, U1)
    assert len(_closure_keys(h, 1, U1)) == h.spec.q


@pytest.mark.parametrize("s", ["Sp:3:13:1", "Omega:3:13:1", "OmegaPlus:4:13:1"])
def test_extra_roots_and_forced_opposite(s):
    from bbsteinberg.classical import _extra_neighbor

    corrections = 0
    for seed in range(3):
        h = make_handle(GroupSpec.parse(s), seed=seed)
        T = build_torus(h)
        W = weyl_elements(h, T)
        _, _, _, U1 = seed_root(h, T)
        roots = propagate_roots(h, W, U1)
        G = h.box
        for force in (False, True):
            stats = Counter()
            U0, Un, _ = extra_roots_bcd(h, T, W, roots, force_opposite=force, stats=stats)
            for node, U in ((0, U0), (h.n, Un)):
                assert all(oracle_in_block(x.value, node, h.config) for x in U)
                nb = roots[_extra_neighbor(h.family, h.n, node)]
                assert all(_commute(G, x, y) for x in U for y in nb)
            corrections += sum(stats.values())
    assert corrections >= 1


def test_extra_roots_rejects_type_a(sl4):
    h, T, W = sl4
    with pytest.raises(PreconditionError):
        extra_roots_bcd(h, T, W, {})


def test_forced_opposite_certificate_still_passes():
    cert = algorithm_classical(make_handle(GroupSpec.parse("Sp:2:13:1"), seed=1), force_opposite=True)
    assert cert.transcript.passed
    assert sum(v for k, v in cert.stats.items() if k.startswith("opposite_correction")) >= 1


@pytest.mark.parametrize("s", GROUPS)
def test_full_algorithm(s):
    for seed in range(2):
        cert = run_classical(GroupSpec.parse(s), seed=seed)
        assert cert.transcript.passed, [a.desc for a in cert.transcript.failures()]


def test_blind_run_without_whitebox():
    cert = run_classical(GroupSpec.parse("SL:2:13:1"), seed=0, whitebox=False)
    assert cert.transcript.passed
    assert cert.handle.config is None


@pytest.mark.parametrize("s", ["Sp:3:5:1", "Omega:3:5:1", "OmegaPlus:4:5:1", "SL:2:7:1", "SL:1:13:1"])
def test_preconditions_rejected(s):
    with pytest.raises(PreconditionError):
        check_classical_preconditions(GroupSpec.parse(s))


@pytest.mark.parametrize("s", ["SL:2:5:1", "SL:3:13:1", "Sp:3:13:1"])
def test_preconditions_accepted(s):
    check_classical_preconditions(GroupSpec.parse(s))


def test_type_a_over_gf5_runs():
    cert = run_classical(GroupSpec.parse("SL:2:5:1"), seed=0)
    assert cert.transcript.passed


def test_certificate_json_deterministic():
    spec = GroupSpec.parse("PSp:2:13:1")
    assert run_classical(spec, seed=9).dumps() == run_classical(spec, seed=9).dumps()
