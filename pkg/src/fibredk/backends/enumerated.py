"""Explicitly tabulated monoidal fibres.

The fibre is a :class:`FinCatPresentation`; tensor, unit and structure
isomorphisms are lookup tables keyed by ids joined with ``|``.  Transitions
between fibres are explicit functor tables, optionally with comparison
isomorphisms; when none are given the transitions must be strict.
"""
from __future__ import annotations

from typing import Mapping

from ..fincat import FinCatPresentation, FunctorPresentation, StructuralError
from ..monoidal import FibreMonoidal, IndexedMonoidal


def _key(*ids: str) -> str:
    return "|".join(ids)


class EnumeratedFibre(FibreMonoidal):
    def __init__(self, cat: FinCatPresentation, tensor_objects: Mapping[str, str],
                 tensor_morphisms: Mapping[str, str], unit: str, assoc: Mapping[str, str],
                 lunit: Mapping[str, str], runit: Mapping[str, str], braid: Mapping[str, str] | None = None,
                 name: str | None = None):
        self.cat = cat
        self.name = name or cat.name
        self.t_obj = dict(tensor_objects)
        self.t_mor = dict(tensor_morphisms)
        self._unit = unit
        self._assoc = dict(assoc)
        self._lunit = dict(lunit)
        self._runit = dict(runit)
        self._braid = dict(braid) if braid is not None else None
        self.symmetric = braid is not None
        for k, v in self.t_obj.items():
            if not cat.has_object(v):
                raise StructuralError(f"tensor entry {k!r} references missing object {v!r}")
        for table, label in ((self.t_mor, "tensor morphism"), (self._assoc, "assoc"), (self._lunit, "lunit"),
                             (self._runit, "runit"), (self._braid or {}, "braid")):
            for k, v in table.items():
                if v not in cat.arrows:
                    raise StructuralError(f"{label} entry {k!r} references missing morphism {v!r}")
        if not cat.has_object(unit):
            raise StructuralError(f"unit references missing object {unit!r}")

    def objects(self):
        return self.cat.objects()

    def has_object(self, x):
        return self.cat.has_object(x)

    def obj_id(self, x):
        return x

    def mor_id(self, m):
        return m

    def parse_obj(self, s):
        if not self.cat.has_object(s):
            raise StructuralError(f"unknown object {s!r}")
        return s

    def parse_mor(self, s):
        if s not in self.cat.arrows:
            raise StructuralError(f"unknown morphism {s!r}")
        return s

    def source(self, m):
        return self.cat.source(m)

    def target(self, m):
        return self.cat.target(m)

    def identity(self, x):
        return self.cat.identity(x)

    def compose(self, g, f):
        return self.cat.compose(g, f)

    def hom_pieces(self, x, y):
        return self.cat.hom_pieces(x, y)

    def tensor_obj(self, x, y):
        return self.t_obj.get(_key(x, y))

    def tensor_mor(self, f, g):
        try:
            return self.t_mor[_key(f, g)]
        except KeyError:
            raise StructuralError(f"tensor undefined on ({f}, {g})") from None

    def unit(self):
        return self._unit

    def _get(self, table, key, label):
        try:
            return table[key]
        except KeyError:
            raise StructuralError(f"{label} missing at {key}") from None

    def assoc(self, x, y, z):
        return self._get(self._assoc, _key(x, y, z), "assoc")

    def lunit(self, x):
        return self._get(self._lunit, x, "lunit")

    def runit(self, x):
        return self._get(self._runit, x, "runit")

    def braid(self, x, y):
        if self._braid is None:
            raise StructuralError("not claimed symmetric")
        return self._get(self._braid, _key(x, y), "braid")

    def describe(self) -> dict:
        return {"backend": "enumerated", "objects": len(self.cat.objects())}


class EnumeratedIndexed(IndexedMonoidal):
    def __init__(self, base: FinCatPresentation, fibres: dict[str, EnumeratedFibre],
                 transitions: Mapping[str, FunctorPresentation], tensor_comparisons: Mapping | None = None,
                 unit_comparisons: Mapping | None = None, composition_isos: Mapping | None = None,
                 identity_isos: Mapping | None = None, name: str = "enumerated"):
        super().__init__(base, fibres, name)
        self.transitions = dict(transitions)
        for f in base.morphism_ids():
            if f not in self.transitions:
                a = base.source(f)
                if base.is_identity(f):
                    ca = fibres[a].cat
                    self.transitions[f] = FunctorPresentation(
                        ca, ca, {x: x for x in ca.objects()}, {m: m for m in ca.arrows}, f"{f}_*")
                else:
                    raise StructuralError(f"no transition functor for base arrow {f!r}")
        self.tc = {k: dict(v) for k, v in (tensor_comparisons or {}).items()}
        self.uc = dict(unit_comparisons or {})
        self.ci = {k: dict(v) for k, v in (composition_isos or {}).items()}
        self.ii = {k: dict(v) for k, v in (identity_isos or {}).items()}
        self.strict = not (self.tc or self.uc or self.ci or self.ii)

    def transition(self, f: str):
        return self.transitions[f]

    def tensor_comparison(self, f, x, y):
        v = self.tc.get(f, {}).get(_key(x, y))
        return v if v is not None else super().tensor_comparison(f, x, y)

    def unit_comparison(self, f):
        v = self.uc.get(f)
        return v if v is not None else super().unit_comparison(f)

    def composition_iso(self, g, f, x):
        v = self.ci.get(_key(g, f), {}).get(x)
        return v if v is not None else super().composition_iso(g, f, x)

    def identity_iso(self, b, x):
        v = self.ii.get(b, {}).get(x)
        return v if v is not None else super().identity_iso(b, x)
