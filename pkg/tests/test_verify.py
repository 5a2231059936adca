import json
from fractions import Fraction

import numpy as np
import pytest

from bbsteinberg.blackbox import matrix_box
from bbsteinberg.classical import run_classical
from bbsteinberg.errors import CapExceeded, PreconditionError
from bbsteinberg.matgroup import GroupSpec, MatrixBackend, classical_generators, ct_config
from bbsteinberg.sl2 import psl2_pipeline
from bbsteinberg.verify import (
    FAMILIES,
    AssertionTranscript,
    closure,
    enumerate_group,
    group_order,
    inject_fault,
    involutions,
    oracle_in_node,
    oracle_proportion,
    replay_transcript,
    stats_run,
    verify_certificate,
    verify_sl2_triple,
)


@pytest.mark.parametrize("s,order", [("PSL:1:5:1", 60), ("SL:1:5:1", 120), ("PSL:1:13:1", 1092), ("SL:1:13:1", 2184),
                                     ("PSL:1:5:2", 7800), ("SL:2:5:1", 372000), ("Sp:2:5:1", 9360000), ("PSp:2:5:1", 4680000)])
def test_group_order(s, order):
    assert group_order(GroupSpec.parse(s)) == order


def test_enumerate_alias():
    import bbsteinberg.verify as V

    assert V.enumerate is V.enumerate_group
    assert len(V.enumerate(GroupSpec.parse("PSL:1:5:1"))) == 60


def test_enumerated_group_index_and_mul():
    G = enumerate_group(GroupSpec.parse("PSL:1:5:1"))
    B = G.backend
    for a in range(0, 60, 7):
        M = G.elements[a]
        assert G.index(M) == a
        assert B.eq(G.elements[G.mul(a, a)], B.mul(M, M))


def test_closure_cap():
    spec = GroupSpec.parse("SL:1:13:1")
    with pytest.raises(CapExceeded):
        closure(MatrixBackend(spec), classical_generators(spec), cap=100)


def test_oracle_proportion_counts():
    G = enumerate_group(GroupSpec.parse("PSL:1:5:1"))
    assert len(involutions(G)) == 15
    assert oracle_proportion(G, lambda M: True) == 1
    assert oracle_proportion(G, lambda M: G.backend.is_identity(M)) == Fraction(1, 60)


def test_oracle_in_node_exact():
    spec = GroupSpec.parse("Sp:3:13:1")
    cfg = ct_config(spec)
    B = MatrixBackend(spec)
    x0 = cfg.node_gens[0][0]
    assert oracle_in_node(x0, 0, spec, cfg)
    # the long-root node is inside the support of K1 but not inside K1
    assert not oracle_in_node(x0, 1, spec, cfg)
    assert oracle_in_node(B.mul(cfg.node_gens[1][0], cfg.node_gens[1][1]), 1, spec, cfg)


def test_transcript_records():
    box = matrix_box(GroupSpec.parse("PSL:1:13:1"), seed=0)
    T = AssertionTranscript(box)
    x = box.random()
    T.eq("x = x", "f", x, x)
    T.is_one("x^E = 1", "f", box.pow(x, box.E))
    T.not_one("x != 1 (may fail)", "g", box.identity())
    assert not T.passed
    assert T.failed_families() == {"g"}
    doc = json.loads(json.dumps(T.to_json()))
    assert [a["pass"] for a in doc["assertions"]] == [True, True, False]


@pytest.mark.parametrize("s", ["PSL:1:13:1", "SL:1:13:1", "PSL:1:5:2"])
def test_sl2_transcript_replay(s):
    spec = GroupSpec.parse(s)
    box = matrix_box(spec, seed=4)
    tr = psl2_pipeline(box, spec.p, spec.k)
    T = verify_sl2_triple(tr, spec)
    assert T.passed
    doc = json.loads(json.dumps(T.to_json()))
    assert replay_transcript(doc, spec, [g.value for g in box.gens]) == [True] * len(doc["assertions"])


def test_sl2_generation_check():
    spec = GroupSpec.parse("PSL:1:13:1")
    tr = psl2_pipeline(matrix_box(spec, seed=1), 13, 1)
    T = verify_sl2_triple(tr, spec)
    fams = {a.family for a in T.entries}
    assert {"unipotent", "torus_inversion", "root_normalized", "root_opposite", "weyl_square", "generation"} <= fams


@pytest.mark.parametrize("s", ["SL:3:13:1", "PSp:2:13:1"])
def test_certificate_transcript_replay(s):
    spec = GroupSpec.parse(s)
    cert = run_classical(spec, seed=2)
    doc = json.loads(cert.dumps())
    gens = [g.value for g in cert.handle.box.gens]
    flags = replay_transcript(doc["transcript"], spec, gens, ct_config(spec))
    assert flags == [True] * len(flags)
    assert {a["family"] for a in doc["transcript"]["assertions"]} == set(FAMILIES)


@pytest.fixture(scope="module")
def sl4_cert():
    return run_classical(GroupSpec.parse("SL:3:13:1"), seed=0)


@pytest.mark.parametrize("family", FAMILIES)
def test_fault_detected(sl4_cert, family):
    assert verify_certificate(sl4_cert).passed
    T = verify_certificate(inject_fault(sl4_cert, family))
    assert family in T.failed_families()


@pytest.mark.parametrize("s", ["PSp:2:13:1", "Omega:3:13:1", "OmegaPlus:4:13:1"])
def test_fault_detected_other_types(s):
    cert = run_classical(GroupSpec.parse(s), seed=1)
    for family in FAMILIES:
        assert family in verify_certificate(inject_fault(cert, family)).failed_families(), family


def test_fault_injection_does_not_touch_original(sl4_cert):
    before = sl4_cert.dumps()
    inject_fault(sl4_cert, "roots_unipotent")
    assert sl4_cert.dumps() == before


def test_fault_unknown_family(sl4_cert):
    with pytest.raises(ValueError):
        inject_fault(sl4_cert, "nonsense")


def test_replay_detects_tampered_steps():
    spec = GroupSpec.parse("PSL:1:13:1")
    box = matrix_box(spec, seed=4)
    T = verify_sl2_triple(psl2_pipeline(box, 13, 1), spec)
    doc = T.to_json()
    gens = [g.value for g in box.gens]
    swapped = [gens[1], gens[0]] + gens[2:]
    assert replay_transcript(doc, spec, swapped) != [True] * len(doc["assertions"])


def test_stats_even_order():
    r = stats_run("even-order-proportion", 2000, seed=1)
    assert r["passed"] and r["target_kind"] == "lower bound"


def test_stats_unipotent():
    r = stats_run("unipotent-proportion", 4000, seed=2)
    assert r["passed"] and r["target"] == "24/91"


def test_stats_odd_product():
    r = stats_run("odd-product-proportion", 2000, seed=3)
    assert r["passed"]
    assert abs(r["frequency"] - 73 / 91) < 0.05


def test_stats_zeta1_uniformity():
    r = stats_run("zeta1-uniformity", 3000, seed=4)
    assert r["bins"] == 4
    assert sum(r["counts"]) == 3000
    assert r["passed"]


def test_stats_rejects_bad_input():
    with pytest.raises(PreconditionError):
        stats_run("nope", 10)
    with pytest.raises(PreconditionError):
        stats_run("unipotent-proportion", 0)
    with pytest.raises(PreconditionError):
        stats_run("unipotent-proportion", 10, group="SL:2:13:1")


def test_stats_deterministic():
    a = stats_run("unipotent-proportion", 500, seed=9)
    b = stats_run("unipotent-proportion", 500, seed=9)
    assert a == b
    assert np.isfinite(a["sigma"])
