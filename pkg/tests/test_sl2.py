from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from bbsteinberg.blackbox import BlackBox, is_odd_order, matrix_box
from bbsteinberg.errors import BudgetExceeded, EvenProduct, PreconditionError, SmallPrimeException
from bbsteinberg.matgroup import GroupSpec, MatrixBackend, oracle_is_toral, oracle_is_unipotent
from bbsteinberg.sl2 import (
    build_klein_four,
    choose_subfield_degree,
    align_torus,
    find_involution,
    is_central,
    order_three_element,
    psl2_pipeline,
    quotient_if_central,
    root_subgroup,
    subfield_subgroup,
    toral_certificate,
    unipotent_search,
)
from bbsteinberg.verify import (
    closure,
    enumerate_group,
    lemma_odd_product_value,
    lemma_unipotent_value,
    odd_product_proportion,
    torus_pair_proportion,
    unipotent_product_proportion,
    verify_sl2_triple,
)


def _setup(s, seed):
    spec = GroupSpec.parse(s)
    box = matrix_box(spec, seed=seed)
    i = find_involution(box)
    work, z = quotient_if_central(box, i)
    if z is not None:
        i = find_involution(work)
    return spec, box, work, i


# -- exact oracle values -------------------------------------------------------


@pytest.mark.parametrize("q,value", [(5, Fraction(8, 15)), (13, Fraction(24, 91))])
def test_unipotent_proportion_exact(q, value):
    G = enumerate_group(GroupSpec.parse(f"PSL:1:{q}:1"))
    assert lemma_unipotent_value(q) == value
    assert unipotent_product_proportion(G) == value


@pytest.mark.parametrize("q,value", [(5, Fraction(2, 5)), (13, Fraction(6, 13))])
def test_torus_pair_count_exact(q, value):
    G = enumerate_group(GroupSpec.parse(f"PSL:1:{q}:1"))
    assert lemma_odd_product_value(q) == value
    assert torus_pair_proportion(G) == value


# order distribution of i j^g by brute force: q=5 -> {1:4, 2:8, 3:16, 5:32}, q=13 -> {1:12, 2:72, 3:144, 6:144, 7:432, 13:288}
@pytest.mark.parametrize("q,value", [(5, Fraction(52, 60)), (13, Fraction(876, 1092))])
def test_odd_product_proportion_oracle(q, value):
    G = enumerate_group(GroupSpec.parse(f"PSL:1:{q}:1"))
    f = odd_product_proportion(G)
    assert f == value
    assert f >= lemma_odd_product_value(q)


def test_enumerated_orders():
    assert len(enumerate_group(GroupSpec.parse("PSL:1:5:1"))) == 60
    assert len(enumerate_group(GroupSpec.parse("PSL:1:13:1"))) == 1092
    assert len(enumerate_group(GroupSpec.parse("SL:1:13:1"))) == 2184


# -- pieces --------------------------------------------------------------------


@pytest.mark.parametrize("p,k,a", [(13, 1, 1), (5, 2, 2), (13, 2, 1), (7, 2, 2), (7, 6, 2), (29, 3, 1), (17, 4, 1), (3, 4, 4)])
def test_choose_subfield_degree(p, k, a):
    assert choose_subfield_degree(p, k) == a


@pytest.mark.parametrize("p,k", [(5, 1), (3, 2)])
def test_small_prime_exception(p, k):
    with pytest.raises(SmallPrimeException):
        choose_subfield_degree(p, k)


def test_small_prime_exception_is_precondition():
    assert issubclass(SmallPrimeException, PreconditionError)


def test_find_involution_budget_on_odd_group():
    spec = GroupSpec.parse("SL:1:13:1")
    B = MatrixBackend(spec)
    u = np.array([[1, 1], [0, 1]])
    box = BlackBox([u], B.mul, B.inv, B.eq, B.identity, 13, key=B.key, seed=0)
    with pytest.raises(BudgetExceeded):
        find_involution(box, budget=50)


def test_sl2_involution_is_central():
    box = matrix_box(GroupSpec.parse("SL:1:13:1"), seed=3)
    i = find_involution(box)
    assert is_central(box, i)
    work, z = quotient_if_central(box, i)
    assert z is not None and work.is_one(i)


def test_psl2_involution_not_central():
    box = matrix_box(GroupSpec.parse("PSL:1:13:1"), seed=3)
    i = find_involution(box)
    work, z = quotient_if_central(box, i)
    assert z is None and work is box


@pytest.mark.parametrize("s", ["PSL:1:13:1", "SL:1:13:1", "PSL:1:5:2", "SL:1:17:1"])
def test_klein_four_and_certificate(s):
    spec, box, work, i = _setup(s, 4)
    V = build_klein_four(work, i, spec.p, spec.k)
    assert work.eq(V.i3, work.mul(V.i1, V.i2))
    for x in (V.i1, V.i2, V.i3):
        assert not work.is_one(x) and work.is_one(work.mul(x, x))
    assert work.eq(work.conj(V.t, V.i2), work.inv(V.t))
    assert V.certificate.recheck(work)
    assert oracle_is_toral(V.t.value, spec)


def test_certificate_rejects_unipotent():
    spec, box, work, i = _setup("PSL:1:13:1", 2)
    u = box.gens[0]
    assert toral_certificate(box, u, 13, 1, 1) is None
    assert toral_certificate(box, box.identity(), 13, 1, 1) is None


def test_certificate_rejects_subfield_torus():
    # in GF(25) an element of GF(5)* fails the primitive-part test
    spec = GroupSpec.parse("SL:1:5:2")
    F = spec.field
    two = F.from_int(2)
    h = np.array([[two, 0], [0, F.inv(two)]])
    B = MatrixBackend(spec)
    box = BlackBox([h], B.mul, B.inv, B.eq, B.identity, 24, key=B.key)
    assert toral_certificate(box, box.gens[0], 5, 2, 2) is None


@pytest.mark.parametrize("s", ["PSL:1:13:1", "SL:1:13:1", "PSL:1:29:1", "SL:1:5:2"])
def test_order_three_element(s):
    spec, box, work, i = _setup(s, 8)
    V = build_klein_four(work, i, spec.p, spec.k)
    x = order_three_element(work, V)
    assert work.eq(work.conj(V.i3, x), V.i2)
    assert work.eq(work.conj(V.i2, x), V.i1)
    assert work.eq(work.conj(V.i1, x), V.i3)
    assert work.is_one(work.pow(x, 3)) and not work.is_one(x)


def test_t1_odd_rate_psl2_13():
    # the first product in the 3-cycle search is odd with probability 73/91 >= 6/13
    spec, box, work, i = _setup("PSL:1:13:1", 21)
    V = build_klein_four(work, i, 13, 1)
    n, hits = 4000, 0
    for _ in range(n):
        g = work.random()
        hits += is_odd_order(work.mul(V.i1, work.conj(V.i2, g)))
    assert abs(hits / n - 73 / 91) < 0.03


@pytest.mark.parametrize("seed", range(6))
def test_subfield_subgroup_is_psl2_13(seed):
    spec, box, work, i = _setup("PSL:1:13:2", seed)
    V = build_klein_four(work, i, 13, 2, 1)
    x = order_three_element(work, V)
    H, a = subfield_subgroup(work, V, x, 13, 2)
    assert a == 1
    size = len(closure(MatrixBackend(spec), [g.value for g in H.gens], cap=10**5))
    assert size == 1092


def test_unipotent_search():
    spec, box, work, i = _setup("PSL:1:13:1", 5)
    stats = Counter()
    u = unipotent_search(work, i, 13, 1, stats=stats)
    assert not work.is_one(u) and work.is_one(work.pow(u, 13))
    assert oracle_is_unipotent(u.value, spec)
    assert stats["unipotent_draws"] >= 1


def test_unipotent_search_budget():
    spec, box, work, i = _setup("PSL:1:13:1", 5)
    with pytest.raises(BudgetExceeded):
        unipotent_search(work, i, 13, 1, budget=0)


def test_root_subgroup_size_gf25():
    tr = psl2_pipeline(matrix_box(GroupSpec.parse("SL:1:5:2"), seed=1), 5, 2)
    U = root_subgroup(tr.box, tr.u, tr.t, 5, 2)
    assert U.size == 25
    assert U.contains(tr.u) and not U.contains(tr.box.conj(tr.u, tr.w))


def test_root_subgroup_predicate_mode():
    tr = psl2_pipeline(matrix_box(GroupSpec.parse("PSL:1:13:1"), seed=1), 13, 1)
    from bbsteinberg.sl2 import RootSubgroup

    U = RootSubgroup(tr.box, tr.U.gens, 13, 1, materialize=False)
    assert U.size is None
    assert U.contains(tr.box.conj(tr.u, tr.t))
    assert not U.contains(tr.box.conj(tr.u, tr.w))
    assert not U.contains(tr.t)


def test_align_torus():
    spec, box, work, i = _setup("PSL:1:13:1", 9)
    done = 0
    for _ in range(200):
        g = box.random()
        j = box.conj(i, g)
        try:
            z = align_torus(box, i, j)
        except EvenProduct:
            continue
        assert box.eq(box.conj(i, z), j)
        done += 1
    assert done > 0


def test_align_torus_rejects_commuting_pair():
    spec, box, work, i = _setup("PSL:1:13:1", 9)
    V = build_klein_four(work, i, 13, 1)
    with pytest.raises(EvenProduct):
        align_torus(work, V.i1, V.i2)


# -- the pipeline --------------------------------------------------------------


PIPELINE_GROUPS = ["PSL:1:13:1", "SL:1:13:1", "PSL:1:29:1", "PSL:1:17:1", "SL:1:41:1",
                   "PSL:1:5:1", "SL:1:5:1", "PSL:1:5:2", "SL:1:7:2", "PSL:1:13:2", "PSL:1:3:2"]


@pytest.mark.parametrize("s", PIPELINE_GROUPS)
def test_pipeline_verifies(s):
    spec = GroupSpec.parse(s)
    for seed in range(3):
        tr = psl2_pipeline(matrix_box(spec, seed=seed), spec.p, spec.k)
        T = verify_sl2_triple(tr, spec)
        assert T.passed, [a.desc for a in T.failures()]
        assert tr.U.size in (None, spec.q)


def test_pipeline_sl2_lifts_unipotent_to_order_p():
    spec = GroupSpec.parse("SL:1:13:1")
    tr = psl2_pipeline(matrix_box(spec, seed=2), 13, 1)
    assert tr.center is not None
    root = tr.box.root
    assert root.is_one(root.pow(tr.u, 13))


def test_pipeline_rejects_q_3_mod_4():
    box = matrix_box(GroupSpec.parse("PSL:1:7:1"), seed=0)
    with pytest.raises(PreconditionError):
        psl2_pipeline(box, 7, 1)


def test_triple_json_deterministic():
    spec = GroupSpec.parse("PSL:1:13:1")
    a = psl2_pipeline(matrix_box(spec, seed=17), 13, 1).dumps()
    b = psl2_pipeline(matrix_box(spec, seed=17), 13, 1).dumps()
    assert a == b


def test_triple_check_detects_bad_w():
    tr = psl2_pipeline(matrix_box(GroupSpec.parse("PSL:1:13:1"), seed=3), 13, 1)
    tr.w = tr.box.identity()
    assert "t^w = t^-1" in tr.check()
