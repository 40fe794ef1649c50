"""Co-coverings, trivial designations and locally trivial modules on z6-cover."""
from __future__ import annotations

import re

import pytest
from hypothesis import given, settings, strategies as st

from conftest import z6_session
from fibredk.fincat import StructuralError
from fibredk.local import (PreCotopology, TrivialDesignation, build_Loc, free_modules, induced_functor_on_Loc,
                           is_locally_trivial_module, is_locally_trivial_object, pullback_modules_along_F)

from oracles import z6_invariant_factors


def _rank(module_id: str) -> tuple[int, int]:
    a, b = re.match(r"Z6:\[(\d+),(\d+)\]", module_id).groups()
    return int(a), int(b)


@pytest.fixture(scope="module")
def site():
    return z6_session()


def _modules_at_X(s):
    R = s.ext.obj_map["X"]
    return [x for x in s.alg.Mod_c.objects() if x.R == R]


def test_free_modules_match_invariant_factors(site):
    s = site
    R = s.ext.obj_map["X"]
    ranks = free_modules(s.alg, R)
    expected = {}
    for x in _modules_at_X(s):
        a, b = _rank(x.id)
        factors = z6_invariant_factors(a, b)
        if set(factors) <= {6}:
            expected[x.id] = len(factors)
    assert ranks == expected
    assert sorted(ranks.values()) == [0, 1, 2]


def test_pulled_back_modules_cover_the_external_base(site):
    s = site
    pulled = pullback_modules_along_F(s.ext)
    assert {b: len(pulled.modules_over(b)) for b in s.ext.B.objects()} == {"X": 14, "U": 6, "V": 4}


def test_every_module_is_locally_free_with_all_free_designations(site):
    loc = build_Loc(site.ext, site.J, site.designations["free"], "X", site.pulled)
    assert len(loc.members) == 14
    assert loc.warning is None


def test_constant_rank_members_are_exactly_a_equals_b(site):
    loc = site.loc("free-constant-rank", "X")
    assert sorted(map(_rank, loc.members)) == [(0, 0), (1, 1), (2, 2)]
    for x in _modules_at_X(site):
        a, b = _rank(x.id)
        assert (x.id in loc.members) == (a == b)


def test_trivial_base_objects(site):
    ok, w = is_locally_trivial_object(site.ext, site.J, site.designations["free"], "X")
    assert ok and set(w.images) == {"U", "V"}
    none = TrivialDesignation(set(), {})
    assert is_locally_trivial_object(site.ext, site.J, none, "X") == (False, None)


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_enlarging_the_designation_only_adds_members(site, data):
    s = site
    full = s.designations["free"]
    pool = sorted((r, m) for r, ms in full.modules.items() for m in ms)
    small = set(data.draw(st.lists(st.sampled_from(pool), unique=True)))
    extra = set(data.draw(st.lists(st.sampled_from(pool), unique=True)))

    def designation(pairs):
        mods: dict[str, set[str]] = {}
        for r, m in pairs:
            mods.setdefault(r, set()).add(m)
        return TrivialDesignation(set(full.objects), mods)

    T1, T2 = designation(small), designation(small | extra)
    for x in _modules_at_X(s):
        in1, _ = is_locally_trivial_module(s.ext, s.J, T1, "X", x)
        in2, _ = is_locally_trivial_module(s.ext, s.J, T2, "X", x)
        assert in2 or not in1


def test_module_over_wrong_monoid_is_structural(site):
    s = site
    y = next(x for x in s.alg.Mod_c.objects() if x.R != s.ext.obj_map["X"])
    with pytest.raises(StructuralError):
        is_locally_trivial_module(s.ext, s.J, s.designations["free"], "X", y)


def test_induced_functor_lands_in_loc(site):
    s = site
    T = s.designations["free-constant-rank"]
    locs = {b: s.loc("free-constant-rank", b) for b in s.ext.B.objects()}
    ind = induced_functor_on_Loc(s.ext, s.J, T, "a", s.pulled, locs)
    assert ind.report.ok
    assert set(ind.images) == set(locs["X"].members)


def test_pre_cotopology_validation(site):
    B = site.ext.B
    assert site.J.validate(B).ok
    bad = PreCotopology({"X": [("a", "nope")], "U": [("a",)]})
    rep = bad.validate(B)
    assert not rep.ok and rep.mentions("nope")
    unknown = PreCotopology({"W": [("a",)]})
    assert unknown.validate(B).structural_errors
    closed = PreCotopology({"X": [("a", "b")]}, has_identities=True, composition_closed=True)
    assert closed.validate(B).ok
