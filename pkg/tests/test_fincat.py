"""Finite categories, functors, pullbacks, fibres and isomorphism search."""
from __future__ import annotations

import itertools

from hypothesis import given, settings, strategies as st

from fibredk.fincat import (FinCatPresentation, FunctorPresentation, constant_functor, fibre_category,
                            find_isomorphisms, identity_functor, pullback_category, validate_category,
                            validate_functor)

from oracles import category_violations, gl_order


def _chain(n: int) -> FinCatPresentation:
    return FinCatPresentation.from_preorder([str(i) for i in range(n)], lambda a, b: int(a) <= int(b), "chain")


def _as_tables(C: FinCatPresentation):
    return C.objects(), C.arrows, C.identities, C.table


@st.composite
def one_object_tables(draw):
    """A random composition table on k arrows of one object, unit fixed at 0."""
    k = draw(st.integers(1, 3))
    names = [f"m{i}" for i in range(k)]
    table = {}
    for g, f in itertools.product(range(k), repeat=2):
        if g == 0:
            table[(names[g], names[f])] = names[f]
        elif f == 0:
            table[(names[g], names[f])] = names[g]
        else:
            table[(names[g], names[f])] = names[draw(st.integers(0, k - 1))]
    return FinCatPresentation(["*"], {m: ("*", "*") for m in names}, {"*": "m0"}, table, "BM")


@settings(max_examples=200, deadline=None)
@given(one_object_tables())
def test_validate_category_matches_triple_loop(C):
    assert validate_category(C).ok == (category_violations(*_as_tables(C)) == [])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5))
def test_chains_are_categories(n):
    C = _chain(n)
    assert category_violations(*_as_tables(C)) == []
    assert validate_category(C).ok
    assert len(C.morphism_ids()) == n * (n + 1) // 2


def test_mutated_composite_is_named():
    C = _chain(3)
    table = dict(C.table)
    table[("1->2", "0->1")] = "0->1"
    bad = FinCatPresentation(C.objects(), C.arrows, C.identities, table, "bad")
    rep = validate_category(bad)
    assert not rep.ok
    assert rep.mentions("1->2") and rep.mentions("0->1")
    assert category_violations(*_as_tables(bad))


def test_presentation_round_trip():
    C = _chain(3)
    assert FinCatPresentation.from_dict(C.to_dict()) == C


def test_functor_checks():
    C = _chain(3)
    T = FinCatPresentation.terminal()
    assert validate_functor(identity_functor(C)).ok
    assert validate_functor(constant_functor(C, T, "*")).ok
    # reversing a chain is not a functor (it does not preserve sources)
    objs = {x: str(2 - int(x)) for x in C.objects()}
    mors = {m: f"{2 - int(m[-1])}->{2 - int(m[0])}" for m in C.morphism_ids()}
    rep = validate_functor(FunctorPresentation(C, C, objs, {m: m for m in mors}, "rev"))
    assert not rep.ok


def test_pullback_of_identities_is_the_category():
    C = _chain(3)
    P, p1, p2 = pullback_category(identity_functor(C), identity_functor(C))
    assert len(P.objects()) == 3
    assert validate_category(P).ok
    assert validate_functor(p1).ok and validate_functor(p2).ok


def test_pullback_over_terminal_is_product():
    C, D, T = _chain(2), _chain(3), FinCatPresentation.terminal()
    P, _, _ = pullback_category(constant_functor(C, T, "*"), constant_functor(D, T, "*"))
    assert len(P.objects()) == 6
    assert sum(P.hom_size(x, y) for x in P.objects() for y in P.objects()) == 3 * 6


def test_pullback_of_z6_projection_with_itself(z6):
    M, _ = z6
    P, _, _ = pullback_category(M.P, M.P)
    # fibres have 14, 6 and 4 objects, so the pullback has the sum of squares
    assert len(P.objects()) == 14 ** 2 + 6 ** 2 + 4 ** 2 == 248


def test_fibres_partition_total_objects(z6):
    M, _ = z6
    sizes = {}
    seen = []
    for b in M.base.objects():
        Eb, incl = fibre_category(M.P, b)
        sizes[b] = len(Eb.objects())
        seen.extend(incl.obj(x) for x in Eb.objects())
    assert sizes == {"Z6": 14, "Z2": 6, "Z3": 4}
    assert sorted(map(M.total.obj_id, seen)) == sorted(map(M.total.obj_id, M.total.objects()))


def test_isomorphism_search(z6, finset):
    M, _ = z6
    Eb, _ = fibre_category(M.P, "Z2")
    plane = ("Z2", (2,))
    assert len(find_isomorphisms(Eb, plane, plane)) == gl_order(2, 2)
    for f, g in find_isomorphisms(Eb, plane, plane):
        assert Eb.is_identity(Eb.compose(g, f)) and Eb.is_identity(Eb.compose(f, g))
    assert find_isomorphisms(Eb, plane, ("Z2", (1,))) == []
    T = FinCatPresentation.terminal()
    assert len(find_isomorphisms(T, "*", "*")) == 1
    F, _ = finset
    Fp, _ = fibre_category(F.P, "pt")
    three = ("pt", 3)
    assert len(find_isomorphisms(Fp, three, three)) == 6
