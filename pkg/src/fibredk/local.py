"""Locally trivial objects and modules over an external base.

An :class:`ExternalBase` is a functor F from a finite category B into the
commutative monoids of a fibred algebra.  Pulling Mod_c back along F gives an
opfibration over B whose fibre at an object is the category of F(B)-modules.
A pre-cotopology assigns to each object of B finitely many co-covering
families; together with a designation of trivial objects and trivial modules
this decides local triviality and the subcategories Loc_B.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .algebra import FibredAlgebra, ModuleObject, MonHom
from .fincat import (
    DEFAULT_BUDGET,
    Category,
    FibreCategory,
    FinCatPresentation,
    FullSubcategory,
    Functor,
    HomPiece,
    PullbackCategory,
    StructuralError,
    TruncationError,
    ValidationReport,
    mapped_piece,
    validate_functor,
)
from .monoidal import unique_filler


# ---------------------------------------------------------------------------
# Data


@dataclass
class PreCotopology:
    """Finite co-covering families out of each object of the external base.

    Axioms are off unless switched on; each enabled flag is checked by
    :meth:`validate`.
    """

    covers: dict[str, list[tuple[str, ...]]]
    has_identities: bool = False
    composition_closed: bool = False

    def families(self, B: FinCatPresentation, b: str) -> list[tuple[str, ...]]:
        fams = {tuple(sorted(f)) for f in self.covers.get(b, [])}
        if self.has_identities:
            fams.add((B.identity(b),))
        return sorted(fams, key=lambda f: (len(f), f))

    def validate(self, B: FinCatPresentation) -> ValidationReport:
        rep = ValidationReport("pre-cotopology")
        for b in sorted(self.covers):
            if not B.has_object(b):
                rep.structural("cover.object", "co-covering at an unknown object", b)
                continue
            for fam in self.covers[b]:
                for f in fam:
                    rep.checked += 1
                    if f not in B.arrows or B.source(f) != b:
                        rep.law("cover.source", "family member does not start at the object", b, f)
        if self.composition_closed:
            for b in B.objects():
                fams = set(self.families(B, b))
                for fam in fams:
                    if any(f not in B.arrows for f in fam):
                        continue
                    # refine each member by a co-covering of its target
                    choices = [self.families(B, B.target(f)) for f in fam]
                    for pick in _product(choices):
                        comp = tuple(sorted({B.compose(g, f) for f, sub in zip(fam, pick) for g in sub}))
                        rep.checked += 1
                        if comp not in fams:
                            rep.law("cover.composition", "composite family is not a co-covering", b, *comp)
        return rep


def _product(lists):
    if not lists:
        yield ()
        return
    for x in lists[0]:
        for rest in _product(lists[1:]):
            yield (x,) + rest


@dataclass
class TrivialDesignation:
    """Trivial base objects and, per monoid id, trivial module ids.

    ``compatible`` optionally constrains the matched trivial modules of a
    whole family (for instance equal rank across the cover).
    """

    objects: set[str] = field(default_factory=set)
    modules: dict[str, set[str]] = field(default_factory=dict)
    compatible: Callable[[list[ModuleObject]], bool] | None = None

    def is_trivial_module(self, x: ModuleObject) -> bool:
        return x.id in self.modules.get(x.R.id, set())

    @classmethod
    def from_predicate(cls, alg: FibredAlgebra, objects: Iterable[str], monoids: Iterable,
                       pred: Callable[[ModuleObject], bool], compatible=None) -> "TrivialDesignation":
        ids = {R.id for R in monoids}
        mods: dict[str, set[str]] = {i: set() for i in ids}
        for x in alg.Mod_c.objects():
            if x.R.id in ids and pred(x):
                mods[x.R.id].add(x.id)
        return cls(set(objects), mods, compatible)

    def validate(self, ext: "ExternalBase") -> ValidationReport:
        rep = ValidationReport("trivial designation")
        known = {x.id for x in ext.alg.Mod_c.objects()}
        for b in sorted(self.objects):
            rep.checked += 1
            if not ext.B.has_object(b):
                rep.structural("designation.object", "unknown base object", b)
        for r in sorted(self.modules):
            for m in sorted(self.modules[r]):
                rep.checked += 1
                if m not in known:
                    rep.structural("designation.module", "designated module is not an enumerated module", r, m)
        return rep


class ExternalBase:
    """B with a functor F: B -> Comm of a fibred algebra."""

    def __init__(self, B: FinCatPresentation, alg: FibredAlgebra, obj: dict[str, Any], mor: dict[str, MonHom],
                 name: str = "F"):
        self.B = B
        self.alg = alg
        self.obj_map = dict(obj)
        self.mor_map = dict(mor)
        for b in B.objects():
            if b not in self.obj_map:
                raise StructuralError(f"F is undefined on object {b}")
        for f in B.morphism_ids():
            if f not in self.mor_map:
                if B.is_identity(f):
                    self.mor_map[f] = alg.Comm.identity(self.obj_map[B.source(f)])
                else:
                    raise StructuralError(f"F is undefined on arrow {f}")
        self.F = Functor(B, alg.Comm, self.obj_map.__getitem__, self.mor_map.__getitem__, name)

    def validate(self, budget: int = DEFAULT_BUDGET) -> ValidationReport:
        rep = ValidationReport(f"external base {self.F.name}")
        for b, R in sorted(self.obj_map.items()):
            rep.checked += 1
            if not self.alg.Comm.has_object(R):
                rep.structural("functor.object", "image is not a commutative monoid of the universe", b)
        if rep.structural_errors:
            return rep
        rep.extend(validate_functor(self.F, budget))
        return rep


# ---------------------------------------------------------------------------
# Pullback of modules along F


class _Pullback(PullbackCategory):
    """B x_Comm Mod_c with one hom piece per (base arrow, Mod_c piece)."""

    def hom_pieces(self, x, y) -> list[HomPiece]:
        out = []
        for f in self.C.hom(x[0], y[0]):
            phi = self.F.mor(f)
            for piece in self.D.hom_pieces(x[1], y[1]):
                if self.B.same_morphism(piece.over, phi):
                    out.append(mapped_piece(piece, lambda m, f=f: (f, m), lambda m: m[1], over=f))
        return out


class PulledBackModules:
    """B x_Comm Mod_c with cleavage from extension of scalars."""

    def __init__(self, ext: ExternalBase, budget: int = DEFAULT_BUDGET):
        self.ext = ext
        alg = ext.alg
        self.alg = alg
        P = alg.mod_projection(comm=True)
        self.total = _Pullback(ext.F, P, name=f"{ext.B.name} x_Comm Mod_c", budget=budget)
        self.projection = Functor(self.total, ext.B, lambda o: o[0], lambda m: m[0], "pr", additive=True,
                                  piece_image=lambda piece: piece.over)

    def lift(self, f: str, obj):
        b, x = obj
        u = self.ext.alg.extension_lift(self.ext.mor_map[f], x)
        return (f, u)

    def fibre(self, b: str) -> FibreCategory:
        return FibreCategory(self.projection, b, name=f"Mod({self.ext.B.obj_id(b)})")

    def modules_over(self, b: str) -> list[ModuleObject]:
        R = self.ext.obj_map[b]
        return [x for x in self.alg.Mod_c.objects() if x.R == R]


def pullback_modules_along_F(ext: ExternalBase, budget: int = DEFAULT_BUDGET) -> PulledBackModules:
    return PulledBackModules(ext, budget)


# ---------------------------------------------------------------------------
# Local triviality


@dataclass
class Witness:
    family: tuple[str, ...]
    images: list[str]  # trivial objects, or trivial module ids matched per member


def is_locally_trivial_object(ext: ExternalBase, J: PreCotopology, T: TrivialDesignation,
                              b: str) -> tuple[bool, Witness | None]:
    for fam in J.families(ext.B, b):
        targets = [ext.B.target(f) for f in fam]
        if all(t in T.objects for t in targets):
            return True, Witness(fam, targets)
    return False, None


def is_locally_trivial_module(ext: ExternalBase, J: PreCotopology, T: TrivialDesignation, b: str,
                              x: ModuleObject) -> tuple[bool, Witness | None]:
    """Some co-covering of b along which every extension of x is trivial."""
    alg = ext.alg
    if x.R != ext.obj_map[b]:
        raise StructuralError(f"module {x.id} is not over F({b})")
    for fam in J.families(ext.B, b):
        imgs = []
        for f in fam:
            y = alg.extension(ext.mor_map[f], x).module
            if not T.is_trivial_module(y):
                break
            imgs.append(y)
        else:
            if T.compatible is None or T.compatible(imgs):
                return True, Witness(fam, [y.id for y in imgs])
    return False, None


@dataclass
class LocResult:
    category: Category
    inclusion: Functor
    membership: dict[str, Witness | None]
    warning: str | None = None
    truncated: list[str] = field(default_factory=list)

    @property
    def members(self) -> list[str]:
        return sorted(k for k, v in self.membership.items() if v is not None)


def build_Loc(ext: ExternalBase, J: PreCotopology, T: TrivialDesignation, b: str,
              pulled: PulledBackModules | None = None) -> LocResult:
    """Full subcategory of the fibre at b on the locally trivial modules."""
    pulled = pulled or pullback_modules_along_F(ext)
    fib = pulled.fibre(b)
    membership: dict[str, Witness | None] = {}
    truncated = []
    keep = set()
    for x in pulled.modules_over(b):
        try:
            ok, w = is_locally_trivial_module(ext, J, T, b, x)
        except TruncationError as e:
            truncated.append(f"{x.id}: {e}")
            membership[x.id] = None
            continue
        membership[x.id] = w if ok else None
        if ok:
            keep.add(x.id)
    ok_obj, _ = is_locally_trivial_object(ext, J, T, b)
    warning = None if ok_obj else f"base object {b} is not locally trivial"
    sub = FullSubcategory(fib, [o for o in fib.objects() if o[1].id in keep], name=f"Loc_{b}")
    inc = Functor(sub, fib, lambda o: o, lambda m: m, f"Loc_{b} -> fibre", additive=True)
    return LocResult(sub, inc, membership, warning, truncated)


@dataclass
class InducedFunctor:
    functor: Functor | None
    report: ValidationReport
    images: dict[str, str]


def induced_functor_on_Loc(ext: ExternalBase, J: PreCotopology, T: TrivialDesignation, f: str,
                           pulled: PulledBackModules | None = None,
                           locs: dict[str, LocResult] | None = None) -> InducedFunctor:
    """Extension of scalars along F(f) restricted to Loc at the source."""
    pulled = pulled or pullback_modules_along_F(ext)
    B, alg = ext.B, ext.alg
    a, c = B.source(f), B.target(f)
    locs = locs or {}
    la = locs.get(a) or build_Loc(ext, J, T, a, pulled)
    lc = locs.get(c) or build_Loc(ext, J, T, c, pulled)
    rep = ValidationReport(f"induced functor along {f}")
    phi = ext.mor_map[f]
    images: dict[str, str] = {}
    by_id = {x.id: x for x in pulled.modules_over(a)}
    target_ids = set(lc.members)
    for mid in la.members:
        y = alg.extension(phi, by_id[mid]).module
        images[mid] = y.id
        rep.checked += 1
        if y.id not in target_ids:
            rep.law("loc.image", "image is not locally trivial", mid, y.id)
    if not rep.ok:
        return InducedFunctor(None, rep, images)

    def on_obj(o):
        return (c, alg.extension(phi, o[1]).module)

    def on_mor(m):
        # (id_a, (id_R, alpha)) |-> the unique fibre morphism between extensions
        _, h = m
        u1 = alg.extension(phi, h.src).unit
        u2 = alg.extension(phi, h.tgt).unit
        P = alg.mod_projection(comm=True)
        k = unique_filler(P, u1, alg.Mod_c.compose(u2, h), alg.Comm.identity(phi.tgt), alg.budget)
        return (B.identity(c), k)

    F = Functor(la.category, lc.category, on_obj, on_mor, f"{f}_!", additive=True)
    return InducedFunctor(F, rep, images)


def loc_sum_designation(ext: ExternalBase, b: str):
    """Direct sum of F(b)-modules as a sum designation on the fibre at b."""
    from .kzero import SumDesignation

    alg = ext.alg
    R = ext.obj_map[b]
    idb = ext.B.identity(b)
    zeros = [x for x in alg.Mod_c.objects() if x.R == R and _is_zero_module(alg, x)]
    if not zeros:
        raise StructuralError(f"no zero module over F({b})")

    def total_sum(X, Y):
        s, j1, j2 = alg.direct_sum(X[1], Y[1])
        return (b, s), (idb, j1), (idb, j2)

    return SumDesignation(total_sum, (b, zeros[0]), f"+ over F({b})")


def _is_zero_module(alg: FibredAlgebra, x: ModuleObject) -> bool:
    fib = alg.M.backend(alg.M.P.obj(x.M))
    return fib.card(x.M[1]) == 1 if hasattr(fib, "card") else x.M[1] == 0


def free_modules(alg: FibredAlgebra, R) -> dict[str, int]:
    """Ids of the modules over R isomorphic to some R^n in the universe, with n.

    R^0 is the zero module and R^(n+1) = R^n + R via the backend direct sum;
    the powers stop at the first one leaving the universe.
    """
    M = alg.M
    zeros = [x for x in alg.Mod.objects() if x.R == R and _is_zero_module(alg, x)]
    if not zeros:
        raise StructuralError(f"no zero module over {R.id}")
    out = {zeros[0].id: 0}
    try:
        regular, _ = alg.canonical_module(R, R.R[1], M.unembed(R.mu))
    except TruncationError:
        return out
    cur, n = regular, 1
    while cur.id not in out:
        out[cur.id] = n
        try:
            cur, _, _ = alg.direct_sum(cur, regular)
        except TruncationError:
            break
        n += 1
    return out


def constant_rank(ranks: dict[str, int]) -> Callable[[list[ModuleObject]], bool]:
    """Family predicate: every matched trivial module has the same rank."""

    def compatible(mods: list[ModuleObject]) -> bool:
        return len({ranks.get(x.id) for x in mods}) <= 1

    return compatible
