"""Monoids, modules, scalar extension/restriction and the fibred checks."""
from __future__ import annotations

import itertools

import pytest
from hypothesis import assume, given, settings, strategies as st

from fibredk import algebra
from fibredk.algebra import (AlgebraConfig, FibredAlgebra, ModuleObject, MonoidObject, adjunction_count,
                             build_Comm, build_Mod, build_Mod_c, build_Mon, extension_of_scalars,
                             fibre_monoid_morphisms, fibre_restriction_check, pseudofunctoriality,
                             reflexive_coequalizer, restriction_of_scalars, validate_module, validate_monoid)
from fibredk.backends.finset import SMor
from fibredk.fincat import TruncationError, validate_functor

from oracles import MONOID_COUNTS, extension_agreement, gl_order


def _brute_monoids(k: int) -> tuple[int, int]:
    """Count monoids on {0..k-1} up to isomorphism by canonical relabelling."""
    seen, comm = set(), set()
    for e in range(k):
        for vals in itertools.product(range(k), repeat=k * k):
            t = {(a, b): vals[a * k + b] for a in range(k) for b in range(k)}
            if any(t[(e, a)] != a or t[(a, e)] != a for a in range(k)):
                continue
            if any(t[(t[(a, b)], c)] != t[(a, t[(b, c)])] for a in range(k) for b in range(k) for c in range(k)):
                continue
            canon = min(tuple(p.index(t[(p[a], p[b])]) for a in range(k) for b in range(k))
                        for p in itertools.permutations(range(k)))
            seen.add(canon)
            if all(t[(a, b)] == t[(b, a)] for a in range(k) for b in range(k)):
                comm.add(canon)
    return len(seen), len(comm)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_brute_force_oracle_agrees_with_oeis(k):
    assert _brute_monoids(k) == MONOID_COUNTS[k]


def test_finset_monoid_counts(finset):
    M, alg = finset
    Mon, P = build_Mon(alg)
    Comm, _ = build_Comm(alg)
    by_size: dict[int, list] = {}
    for R in Mon.objects():
        by_size.setdefault(R.R[1], []).append(R)
    for k in (1, 2, 3):
        assert len(by_size[k]) == MONOID_COUNTS[k][0]
        assert sum(R.commutative for R in by_size[k]) == MONOID_COUNTS[k][1]
    assert len(Comm.objects()) == 8
    assert validate_functor(P).ok


def test_z6_monoids_one_per_carrier(z6):
    M, alg = z6
    Comm, _ = build_Comm(alg)
    assert len(Comm.objects()) == len(alg.Mon.objects()) == 8
    assert "Z6:[1,1](mu=1;1,eta=1;1)" in {R.id for R in Comm.objects()}


def test_mod_categories_and_projections(finset):
    M, alg = finset
    Mod, P = build_Mod(alg)
    Mod_c, Pc = build_Mod_c(alg)
    assert len(Mod.objects()) == 152
    assert {x.R for x in Mod_c.objects()} <= set(alg.Comm.objects())
    for x in Mod.objects()[:20]:
        assert validate_module(M, x).ok
        assert P.obj(x) == x.R


def test_validate_monoid_rejects_bad_unit(finset):
    M, alg = finset
    R = next(R for R in alg.Mon.objects() if R.R[1] == 2)
    e = M.unembed(R.eta).fn[0]
    bad = MonoidObject(R.R, R.mu, M.embed("pt", SMor(1, 2, (1 - e,))), R.commutative, "bad")
    rep = validate_monoid(M, bad)
    assert not rep.ok


def test_validate_module_rejects_non_action(finset):
    M, alg = finset
    R = next(R for R in alg.Mon.objects() if R.R[1] == 2 and M.unembed(R.eta).fn == (0,))
    # constant action to 0 on a 2-element set breaks m.e = m
    kappa = M.embed("pt", SMor(4, 2, (0, 0, 0, 0)))
    x = ModuleObject(R, ("pt", 2), kappa, "bad")
    assert not validate_module(M, x).ok


# extension of scalars against a union-find oracle -------------------------------


# (module, monoid morphism) pairs on finite sets of size <= 4 whose extension
# stays inside the universe, frozen from the union-find oracle
IN_UNIVERSE_PAIRS = 2135


def _finset_extension_pairs(alg):
    mods = alg.Mod.objects()
    return [(phi, x) for phi in fibre_monoid_morphisms(alg) for x in mods if x.R == phi.src]


def test_extension_matches_union_find_on_every_pair(finset):
    M, alg = finset
    pairs = _finset_extension_pairs(alg)
    assert len(pairs) == 3351
    inside, expected, bad = extension_agreement(pairs, M.unembed, alg.extension, 4, TruncationError)
    assert bad == []
    assert inside == expected == IN_UNIVERSE_PAIRS


def test_restriction_along_identity_is_identity(finset):
    M, alg = finset
    for x in alg.Mod.objects()[:40]:
        idR = alg.Mon.identity(x.R)
        assert restriction_of_scalars(alg, idR, x) == x


def test_extension_along_identity_is_isomorphic(finset):
    M, alg = finset
    for x in alg.Mod.objects()[:40]:
        ext = extension_of_scalars(alg, alg.Mon.identity(x.R), x)
        assert ext.module == x


def test_restriction_rejects_wrong_monoid(finset):
    M, alg = finset
    phi = next(p for p in fibre_monoid_morphisms(alg) if p.src != p.tgt)
    y = next(x for x in alg.Mod.objects() if x.R == phi.src)
    with pytest.raises(algebra.StructuralError):
        restriction_of_scalars(alg, phi, y)


def test_reflexive_coequalizer_on_sets(finset):
    M, _ = finset
    fib = M.backend("pt")
    # identify 0 ~ 1 in a 4-element set via a reflexive pair 5 => 4
    d0 = SMor(5, 4, (0, 1, 2, 3, 0))
    d1 = SMor(5, 4, (0, 1, 2, 3, 1))
    s = SMor(4, 5, (0, 1, 2, 3))
    c = reflexive_coequalizer(fib, d0, d1, s)
    assert c.certificate is None
    assert c.obj == 3


def test_reflexive_coequalizer_rejects_non_reflexive(finset):
    M, _ = finset
    fib = M.backend("pt")
    d0 = SMor(2, 2, (0, 1))
    d1 = SMor(2, 2, (1, 0))
    s = SMor(2, 2, (1, 1))
    with pytest.raises(algebra.StructuralError):
        reflexive_coequalizer(fib, d0, d1, s)


# adjunction, pseudofunctoriality and fibre restriction --------------------------


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_adjunction_counts_agree_random(finset, data):
    M, alg = finset
    homs = fibre_monoid_morphisms(alg)
    phi = data.draw(st.sampled_from(homs))
    xs = [x for x in alg.Mod.objects() if x.R == phi.src and x.M[1] <= 2]
    ys = [y for y in alg.Mod.objects() if y.R == phi.tgt and y.M[1] <= 2]
    if not xs or not ys:
        return
    try:
        c = adjunction_count(alg, phi, data.draw(st.sampled_from(xs)), data.draw(st.sampled_from(ys)))
    except TruncationError:
        assume(False)
    assert c.lhs == c.rhs and c.bijective


def test_pseudofunctoriality_sample(finset):
    M, alg = finset
    homs = fibre_monoid_morphisms(alg)
    checked = 0
    for phi in homs[:15]:
        for psi in homs[:15]:
            if phi.tgt != psi.src:
                continue
            for x in [x for x in alg.Mod.objects() if x.R == phi.src][:2]:
                assert pseudofunctoriality(alg, phi, psi, x).ok
                checked += 1
    assert checked > 0


def test_fibre_restriction_on_f2():
    from fibredk.backends.modules import ModuleIndexed, ring_base
    from fibredk.monoidal import grothendieck_construction

    base = ring_base({"F2": 2}, {})
    M, _ = grothendieck_construction(ModuleIndexed(base, {"F2": 2}, 8), "f2")
    alg = FibredAlgebra(M, AlgebraConfig(monoid_bound=2))
    assert fibre_restriction_check(M, alg, "F2").ok


def test_gl2_f2_is_automorphism_group_of_plane():
    from fibredk.backends.modules import ModuleFibre

    fib = ModuleFibre(2, 8)
    assert len(fib.automorphisms((2,))) == gl_order(2, 2) == 6
