"""Iso classes, Smith normal form certificates and group completion."""
from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from fibredk import cli
from fibredk.fincat import FinCatPresentation, StructuralError, fibre_category
from fibredk.kzero import (SmithForm, SumDesignation, check_smith, fibre_sum_designation, group_completion,
                           iso_classes, smith_normal_form)

from oracles import determinantal_invariants

matrices = st.integers(1, 4).flatmap(
    lambda r: st.integers(1, 4).flatmap(
        lambda c: st.lists(st.lists(st.integers(-9, 9), min_size=c, max_size=c), min_size=r, max_size=r)))


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_smith_form_is_certified_and_matches_minors(A):
    sf = smith_normal_form(A)
    assert check_smith(A, sf) is None
    assert sf.invariants == determinantal_invariants(A)


def test_check_smith_rejects_tampered_certificate():
    A = [[2, 4], [6, 8]]
    sf = smith_normal_form(A)
    bad = SmithForm([[1, 0], [0, 4]], sf.U, sf.V)
    assert check_smith(A, bad) is not None
    bad_chain = [[2, 0], [0, 3]]
    ident = SmithForm(bad_chain, [[1, 0], [0, 1]], [[1, 0], [0, 1]])
    assert "divisibility" in check_smith(bad_chain, ident)


def test_smith_of_empty_relation_set():
    sf = smith_normal_form([], 3)
    assert sf.invariants == []
    assert len(sf.V) == 3


@pytest.fixture(scope="module")
def f2():
    s = cli.Session(cli.parse("f2-vect"), cli.Settings())
    C, _ = fibre_category(s.M.P, "F2", s.budget)
    return s, C


def test_f2_iso_classes_are_dimensions(f2):
    s, C = f2
    classes = iso_classes(C)
    assert [[C.obj_id(x) for x in c] for c in classes] == [["F2:[0]"], ["F2:[1]"], ["F2:[2]"], ["F2:[3]"]]


def test_f2_k0_is_z_via_dimension(f2):
    s, C = f2
    g = group_completion(C, fibre_sum_designation(s.M, "F2"))
    assert g.describe() == "Z"
    assert g.homomorphism_is_iso([[d] for d in range(4)])
    assert not g.homomorphism_is_iso([[2 * d] for d in range(4)])
    assert g.is_basis(["F2:[1]"])
    # pairs whose sum has dimension > 3 leave the universe
    assert len(g.omitted) == 4


@settings(max_examples=25, deadline=None)
@given(st.permutations(range(4)))
def test_group_completion_invariant_under_class_order(f2, perm):
    s, C = f2
    classes = iso_classes(C)
    S = fibre_sum_designation(s.M, "F2")
    g = group_completion(C, S, classes=[classes[i] for i in perm])
    assert g.describe() == "Z"
    assert sorted(g.generators) == sorted(C.obj_id(c[0]) for c in classes)


def test_sum_designation_validates_on_f2(f2):
    s, C = f2
    assert fibre_sum_designation(s.M, "F2").validate(C).ok


def _cyclic_monoid_category(n: int) -> FinCatPresentation:
    """Discrete category on the residues 0..n-1 (sums are supplied separately)."""
    return FinCatPresentation.discrete([str(i) for i in range(n)], "Zn")


def test_group_completion_of_cyclic_sums():
    C = _cyclic_monoid_category(4)

    def add(x, y):
        s = str((int(x) + int(y)) % 4)
        return s, None, None

    g = group_completion(C, SumDesignation(add, "0"))
    assert g.describe() == "Z/4"
    assert g.torsion == [4]


def test_sum_designation_reports_bad_zero():
    C = _cyclic_monoid_category(3)
    S = SumDesignation(lambda x, y: (str((int(x) + int(y)) % 3), C.identity(x), C.identity(y)), "1")
    rep = S.validate(C)
    assert not rep.ok and rep.mentions("X + 0")


def test_fibre_sum_designation_needs_direct_sums():
    from fibredk.backends import finset_indexed
    from fibredk.monoidal import grothendieck_construction

    M, _ = grothendieck_construction(finset_indexed(2))
    assert isinstance(fibre_sum_designation(M, "pt"), SumDesignation)
    with pytest.raises(StructuralError):
        fibre_sum_designation(M, "missing")


def test_k0_request_without_sums_is_skipped():
    text = """{
      "format": "fibredk-presentation/1", "name": "tiny", "universe": {"bound": 2},
      "base": {"objects": ["b"], "arrows": {}},
      "fibres": {"b": {"backend": "enumerated",
        "category": {"objects": ["I"], "arrows": {}},
        "tensor": {"objects": {"I|I": "I"}, "morphisms": {"id_I|id_I": "id_I"}},
        "unit": "I", "assoc": {"I|I|I": "id_I"}, "lunit": {"I": "id_I"}, "runit": {"I": "id_I"}}},
      "analysis": {"k0": [{"category": "fibre", "object": "b"}]}
    }"""
    report = cli.run(cli.parse_text(text))
    entry = report["k0"][0]
    assert entry["status"] == "skipped"
    assert "sum" in entry["reason"]

