"""Opcartesian morphisms, opfibrations and the monoidal/symmetric checks."""
from __future__ import annotations

import pytest

from fibredk.backends import finset_indexed
from fibredk.backends.modules import ModuleIndexed, ring_base
from fibredk.fincat import StructuralError
from fibredk.monoidal import (direct_image_functor, grothendieck_construction, is_opcartesian, verify_monoidal_opfibration,
                              verify_opfibration, verify_symmetry)

BAD_LIFT = "Z6:[1,0]|q2|[1]->[1]:0"


@pytest.fixture(scope="module")
def f2():
    base = ring_base({"F2": 2}, {})
    M, rep = grothendieck_construction(ModuleIndexed(base, {"F2": 2}, 8), "f2")
    return M, rep


def test_grothendieck_construction_reports(z6, f2):
    M, _ = z6
    assert len(M.total.objects()) == 14 + 6 + 4
    _, rep = f2
    assert rep.ok


def test_z6_is_an_opfibration(z6):
    M, _ = z6
    rep = verify_opfibration(M.P, M.lift)
    assert rep.ok and rep.checked > 0


def test_chosen_lift_is_opcartesian(z6):
    M, _ = z6
    X = M.total.parse_obj("Z6:[1,0]")
    assert is_opcartesian(M.P, M.lift("q2", X))


def test_zero_map_over_quotient_is_not_opcartesian(z6):
    M, _ = z6
    res = is_opcartesian(M.P, M.total.parse_mor(BAD_LIFT))
    assert not res.ok
    assert res.witness


def test_bad_cleavage_is_rejected_with_witness(z6):
    M, _ = z6
    X = M.total.parse_obj("Z6:[1,0]")
    bad = M.with_overrides(cleavage={("q2", M.total.obj_id(X)): M.total.parse_mor(BAD_LIFT)})
    rep = verify_opfibration(bad.P, bad.lift)
    assert not rep.ok
    assert rep.mentions("q2") and rep.mentions("Z6:[1,0]")


def test_unknown_direct_image_is_structural(z6):
    M, _ = z6
    with pytest.raises(StructuralError):
        direct_image_functor(M, "nope")


@pytest.mark.parametrize("f", ["q2", "q3"])
def test_direct_images_are_strong_monoidal(z6, f):
    M, _ = z6
    di = direct_image_functor(M, f)
    assert di.report.ok and di.report.checked > 0
    assert di.tensor_comparison


def test_f2_monoidal_and_symmetric(f2):
    M, _ = f2
    rep = verify_monoidal_opfibration(M)
    assert rep.failures == [] and rep.structural_errors == []
    assert verify_symmetry(M).ok


def test_finset_monoidal_and_symmetric():
    M, rep = grothendieck_construction(finset_indexed(3))
    assert rep.ok
    mon = verify_monoidal_opfibration(M)
    assert mon.failures == [] and mon.structural_errors == []
    assert verify_symmetry(M).ok


def test_broken_unit_is_named(f2):
    M, _ = f2
    X = M.total.parse_obj("F2:[1]")
    zero = M.total.parse_mor("F2:[1]|id_F2|[1]->[1]:0")
    bad = M.with_overrides(lunit={M.total.obj_id(X): zero})
    rep = verify_monoidal_opfibration(bad)
    assert not rep.ok
    assert rep.mentions("F2:[1]")
