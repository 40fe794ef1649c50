"""Monoidal opfibrations: opcartesian lifts, tensor over the base, coherence.

A :class:`MonoidalOpfibration` bundles a projection ``P: E -> B`` with a
cleavage, a tensor on ``E x_B E``, a unit section and the structure
isomorphisms.  The usual way to get one is :func:`grothendieck_construction`
applied to :class:`IndexedMonoidal` data (fibres plus transition functors),
which yields a lazy total category whose morphisms over ``f: A -> B`` from
``(A, X)`` to ``(B, Y)`` are fibre morphisms ``f_* X -> Y``.

Quantifiers over morphisms are discharged per hom piece: explicit pieces are
enumerated, linear pieces are handled by rank computations (a precomposition
map is bijective iff the pieces have equal size and its kernel is zero) or
by checking additive identities on basis elements.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

from .fincat import (
    DEFAULT_BUDGET,
    Category,
    FinCatPresentation,
    FibreCategory,
    Functor,
    HomPiece,
    LinearPiece,
    ListPiece,
    PullbackCategory,
    StructuralError,
    TruncationError,
    ValidationReport,
    _pieces_by_image,
    find_isomorphisms,
    linear_map_rank,
    linear_solve,
    validate_functor,
)


class UnsupportedBackend(StructuralError):
    """The fibre backend lacks a required computation (e.g. coequalizers)."""


# ---------------------------------------------------------------------------
# Fibres and indexed data


class FibreMonoidal(Category):
    """A monoidal category usable as a fibre.

    Subclasses supply the tensor on objects and morphisms, the unit and the
    structure isomorphisms as plain fibre morphisms.  ``tensor_obj`` may
    return an object outside ``objects()``; callers treat that as leaving the
    universe.
    """

    symmetric = False

    def tensor_obj(self, x, y):
        raise NotImplementedError

    def tensor_mor(self, f, g):
        raise NotImplementedError

    def unit(self):
        raise NotImplementedError

    def assoc(self, x, y, z):
        raise NotImplementedError

    def lunit(self, x):
        raise NotImplementedError

    def runit(self, x):
        raise NotImplementedError

    def braid(self, x, y):
        raise NotImplementedError

    def parse_obj(self, s: str):
        for x in self.objects():
            if self.obj_id(x) == s:
                return x
        raise StructuralError(f"unknown object {s!r}")

    def parse_mor(self, s: str):
        raise StructuralError(f"{self.name}: morphism parsing unsupported")

    def describe(self) -> dict:
        return {"name": self.name}


class IndexedMonoidal:
    """Base category, fibre per base object and strong monoidal transitions.

    ``transition(f)`` is the functor ``f_*`` between fibres; the remaining
    methods return the comparison isomorphisms in the target fibre.  The
    defaults are the strict ones (identities), valid when ``f_*`` commutes
    with tensor, unit and composition on the nose.
    """

    def __init__(self, base: FinCatPresentation, fibres: dict[str, FibreMonoidal], name: str = "E"):
        self.base = base
        self.fibres = fibres
        self.name = name

    def transition(self, f: str) -> Functor:
        raise NotImplementedError

    def tensor_comparison(self, f: str, x, y):
        """f_*(X (x) Y) -> f_*X (x) f_*Y in the target fibre."""
        B = self.base.target(f)
        A = self.base.source(f)
        F = self.transition(f)
        return self.fibres[B].identity(F.obj(self.fibres[A].tensor_obj(x, y)))

    def unit_comparison(self, f: str):
        """f_*(I_A) -> I_B."""
        B = self.base.target(f)
        return self.fibres[B].identity(self.fibres[B].unit())

    def composition_iso(self, g: str, f: str, x):
        """(g f)_* X -> g_* f_* X."""
        C = self.base.target(g)
        Fg, Ff = self.transition(g), self.transition(f)
        return self.fibres[C].identity(Fg.obj(Ff.obj(x)))

    def identity_iso(self, b: str, x):
        """(id_b)_* X -> X."""
        return self.fibres[b].identity(x)

    strict = True


# ---------------------------------------------------------------------------
# Grothendieck total category


class GMor(NamedTuple):
    src: tuple
    tgt: tuple
    f: str
    m: Any  # fibre morphism f_* X -> Y in the fibre over tgt[0]


class GrothendieckTotal(Category):
    def __init__(self, data: IndexedMonoidal):
        self.data = data
        self.base = data.base
        self.fibres = data.fibres
        self.name = data.name
        self._objs = [(b, x) for b in self.base.objects() for x in self.fibres[b].objects()]
        self._identities = {self.base.identity(b) for b in self.base.objects()}

    def objects(self) -> list:
        return list(self._objs)

    def has_object(self, x) -> bool:
        return (isinstance(x, tuple) and len(x) == 2 and x[0] in self.fibres
                and self.fibres[x[0]].has_object(x[1]))

    def obj_id(self, x) -> str:
        return f"{x[0]}:{self.fibres[x[0]].obj_id(x[1])}"

    def mor_id(self, m: GMor) -> str:
        return f"{self.obj_id(m.src)}|{m.f}|{self.fibres[m.tgt[0]].mor_id(m.m)}"

    def parse_obj(self, s: str):
        b, _, rest = s.partition(":")
        if b not in self.fibres:
            raise StructuralError(f"unknown base object in {s!r}")
        return (b, self.fibres[b].parse_obj(rest))

    def parse_mor(self, s: str) -> GMor:
        try:
            src_s, f, rest = s.split("|", 2)
        except ValueError:
            raise StructuralError(f"malformed morphism id {s!r}") from None
        src = self.parse_obj(src_s)
        if f not in self.base.arrows:
            raise StructuralError(f"unknown base morphism {f!r} in {s!r}")
        B = self.base.target(f)
        m = self.fibres[B].parse_mor(rest)
        return GMor(src, (B, self.fibres[B].target(m)), f, m)

    def source(self, m):
        return m.src

    def target(self, m):
        return m.tgt

    def identity(self, x):
        b = x[0]
        return GMor(x, x, self.base.identity(b), self.data.identity_iso(b, x[1]))

    def compose(self, g: GMor, f: GMor) -> GMor:
        if g.src != f.tgt:
            raise StructuralError("composing non-composable morphisms")
        C = g.tgt[0]
        fib = self.fibres[C]
        gf = self.base.compose(g.f, f.f)
        if self.data.strict and g.f in self._identities:
            push = f.m
        else:
            push = self.data.transition(g.f).mor(f.m)
        m = fib.compose(g.m, push)
        if not self.data.strict:
            m = fib.compose(m, self.data.composition_iso(g.f, f.f, f.src[1]))
        return GMor(f.src, g.tgt, gf, m)

    def pushed(self, f: str, x):
        return self.data.transition(f).obj(x)

    def hom_pieces(self, x, y, bounded: bool = True) -> list[HomPiece]:
        out = []
        fib = self.fibres[y[0]]
        for f in self.base.hom(x[0], y[0]):
            fx = self.pushed(f, x[1])
            if bounded and not fib.has_object(fx):
                raise TruncationError("direct image", "fibre universe", f"{f} applied to {self.obj_id(x)}")
            for piece in fib.hom_pieces(fx, y[1]):
                out.append(_wrap_piece(piece, x, y, f))
        return out

    def inverse(self, m: GMor, budget: int = DEFAULT_BUDGET):
        if self.data.strict and self.base.is_identity(m.f):
            inv = self.fibres[m.tgt[0]].inverse(m.m, budget)
            if inv is None:
                return None
            return GMor(m.tgt, m.src, m.f, inv)
        return super().inverse(m, budget)


def _wrap_piece(piece: HomPiece, x, y, f: str) -> HomPiece:
    wrap = lambda m: GMor(x, y, f, m)  # noqa: E731
    if piece.linear:
        return LinearPiece(wrap(piece.zero), {p: [wrap(b) for b in bs] for p, bs in piece.basis.items()},
                           lambda m: piece.coords(m.m), lambda c: wrap(piece.combine(c)), over=f)
    return _MappedPiece(piece, wrap, f)


class _MappedPiece(HomPiece):
    def __init__(self, inner: HomPiece, wrap, over):
        self.inner = inner
        self.wrap = wrap
        self.over = over

    @property
    def size(self) -> int:
        return self.inner.size

    def elements(self, budget: int = DEFAULT_BUDGET) -> list:
        return [self.wrap(m) for m in self.inner.elements(budget)]


# ---------------------------------------------------------------------------
# The monoidal opfibration


@dataclass
class MonoidalOpfibration:
    """P: E -> B with cleavage, tensor, unit section and structure isos.

    All structure maps take and return total-category values.  ``overrides``
    replace individual data (keyed by ids) and exist to inject faults.
    """

    base: FinCatPresentation
    total: Category
    P: Functor
    lift_fn: Callable[[str, Any], Any]
    tensor_obj_fn: Callable[[Any, Any], Any]
    tensor_mor_fn: Callable[[Any, Any], Any]
    unit_obj_fn: Callable[[str], Any]
    unit_mor_fn: Callable[[str], Any]
    assoc_fn: Callable[[Any, Any, Any], Any]
    lunit_fn: Callable[[Any], Any]
    runit_fn: Callable[[Any], Any]
    braid_fn: Callable[[Any, Any], Any] | None = None
    name: str = "P"
    indexed: IndexedMonoidal | None = None
    overrides: dict = field(default_factory=dict)
    backends: dict = field(default_factory=dict)

    # fibre backends ------------------------------------------------------

    def backend(self, b: str) -> FibreMonoidal:
        """The concrete fibre over ``b`` (needed for coequalizers and enumeration)."""
        try:
            return self.backends[b]
        except KeyError:
            raise UnsupportedBackend(f"no fibre backend over {b!r}") from None

    def embed(self, b: str, m) -> GMor:
        """A fibre morphism of the backend over ``b`` as a total morphism over id_b."""
        fib = self.backend(b)
        return GMor((b, fib.source(m)), (b, fib.target(m)), self.base.identity(b), m)

    def unembed(self, g: GMor):
        if not self.base.is_identity(g.f):
            raise StructuralError("morphism does not lie in a fibre")
        return g.m

    def embed_obj(self, b: str, x):
        return (b, x)

    # structure ----------------------------------------------------------

    @property
    def symmetric(self) -> bool:
        return self.braid_fn is not None

    def _ov(self, kind: str, key):
        return self.overrides.get(kind, {}).get(key)

    def lift(self, f: str, E):
        o = self._ov("cleavage", (f, self.total.obj_id(E)))
        return o if o is not None else self.lift_fn(f, E)

    def pushforward(self, f: str, E):
        return self.total.target(self.lift(f, E))

    def tensor_obj(self, X, Y):
        return self.tensor_obj_fn(X, Y)

    def tensor_mor(self, u, v):
        return self.tensor_mor_fn(u, v)

    def unit_obj(self, b: str):
        o = self._ov("unit_obj", b)
        return o if o is not None else self.unit_obj_fn(b)

    def unit_mor(self, f: str):
        o = self._ov("unit", f)
        return o if o is not None else self.unit_mor_fn(f)

    def assoc(self, X, Y, Z):
        o = self._ov("assoc", tuple(self.total.obj_id(v) for v in (X, Y, Z)))
        return o if o is not None else self.assoc_fn(X, Y, Z)

    def lunit(self, X):
        o = self._ov("lunit", self.total.obj_id(X))
        return o if o is not None else self.lunit_fn(X)

    def runit(self, X):
        o = self._ov("runit", self.total.obj_id(X))
        return o if o is not None else self.runit_fn(X)

    def braid(self, X, Y):
        if self.braid_fn is None:
            raise StructuralError("not claimed symmetric")
        o = self._ov("braid", (self.total.obj_id(X), self.total.obj_id(Y)))
        return o if o is not None else self.braid_fn(X, Y)

    def in_universe(self, X) -> bool:
        return self.total.has_object(X)

    def with_overrides(self, **kinds) -> "MonoidalOpfibration":
        ov = {k: dict(v) for k, v in self.overrides.items()}
        for k, v in kinds.items():
            ov.setdefault(k, {}).update(v)
        return MonoidalOpfibration(self.base, self.total, self.P, self.lift_fn, self.tensor_obj_fn,
                                   self.tensor_mor_fn, self.unit_obj_fn, self.unit_mor_fn, self.assoc_fn,
                                   self.lunit_fn, self.runit_fn, self.braid_fn, self.name, self.indexed, ov,
                                   self.backends)

    # derived ------------------------------------------------------------

    def fibre(self, b: str) -> FibreCategory:
        return FibreCategory(self.P, b)

    def objects_over(self, b: str) -> list:
        return [x for x in self.total.objects() if self.P.obj(x) == b]

    def tensor_functor(self) -> tuple[PullbackCategory, Functor]:
        EE = PullbackCategory(self.P, self.P, name=f"{self.total.name}x_B{self.total.name}")
        T = Functor(EE, self.total, lambda xy: self.tensor_obj(*xy), lambda uv: self.tensor_mor(*uv),
                    "tensor", additive=True)
        return EE, T

    def unit_functor(self) -> Functor:
        return Functor(self.base, self.total, self.unit_obj, self.unit_mor, "unit")

    def restrict_to(self, b: str) -> "MonoidalOpfibration":
        """The fibre over ``b`` as a monoidal opfibration over a one-object base."""
        idb = self.base.identity(b)
        base = FinCatPresentation([b], {idb: (b, b)}, {b: idb}, {(idb, idb): idb}, name=f"{{{b}}}")
        fib = FibreCategory(self.P, b, name=f"{self.total.name}_{b}")
        P = Functor(fib, base, lambda x: self.P.obj(x), lambda m: self.P.mor(m), f"P_{b}", additive=True,
                    piece_image=lambda piece: piece.over)
        return MonoidalOpfibration(base, fib, P, lambda f, E: self.lift(f, E), self.tensor_obj_fn,
                                   self.tensor_mor_fn, self.unit_obj_fn, self.unit_mor_fn, self.assoc_fn,
                                   self.lunit_fn, self.runit_fn, self.braid_fn, f"{self.name}_{b}",
                                   None, self.overrides,
                                   {b: self.backends[b]} if b in self.backends else {})


# ---------------------------------------------------------------------------
# Opcartesian morphisms


@dataclass
class OpcartesianResult:
    ok: bool
    checked: int = 0
    witness: dict | None = None
    truncated: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _pieces_over(C: Category, P: Functor, x, y, budget: int) -> dict[Any, tuple[Any, HomPiece]]:
    """Hom pieces x -> y keyed by ``mor_key`` of their base morphism."""
    out: dict[Any, tuple[Any, HomPiece]] = {}
    for b, piece in _pieces_by_image(C, P, x, y, budget):
        key = P.target.mor_key(b)
        if key in out:
            # several pieces over the same base morphism: merge as a list
            prev = out[key][1]
            out[key] = (b, ListPiece(prev.elements(budget) + piece.elements(budget), over=b))
        else:
            out[key] = (b, piece)
    return out


def fillers(P: Functor, m, g, h, budget: int = DEFAULT_BUDGET) -> list:
    """All k over ``h`` with k . m = g (enumerated; linear pieces solved)."""
    E = P.source
    pieces = _pieces_over(E, P, E.target(m), E.target(g), budget)
    key = P.target.mor_key(h)
    if key not in pieces:
        return []
    _, S = pieces[key]
    if S.linear:
        tgt = _pieces_over(E, P, E.source(m), E.target(g), budget).get(P.target.mor_key(P.mor(g)))
        if tgt is not None and tgt[1].linear:
            T = tgt[1]
            x = linear_solve(S, T, lambda k: E.compose(k, m), g)
            if x is None:
                return []
            _, kernels = linear_map_rank(S, T, lambda k: E.compose(k, m))
            if not any(kernels.values()):
                return [x]
            if S.size > budget:
                raise TruncationError("filler enumeration", budget)
    return [k for k in S.elements(budget) if E.same_morphism(E.compose(k, m), g)]


def unique_filler(P: Functor, m, g, h, budget: int = DEFAULT_BUDGET):
    fs = fillers(P, m, g, h, budget)
    if len(fs) != 1:
        raise StructuralError(f"expected a unique filler, found {len(fs)}")
    return fs[0]


def is_opcartesian(P: Functor, m, budget: int = DEFAULT_BUDGET) -> OpcartesianResult:
    """Does every g: E -> E'' over h . P(m) factor uniquely as k . m, k over h?"""
    E = P.source
    B = P.target
    src, tgt = E.source(m), E.target(m)
    if not E.has_object(src) or not E.has_object(tgt):
        raise StructuralError("morphism is not in the total category")
    f = P.mor(m)
    res = OpcartesianResult(True)
    Bt = P.obj(tgt)
    for E2 in E.objects():
        b2 = P.obj(E2)
        hs = B.hom(Bt, b2)
        if not hs:
            continue
        try:
            from_tgt = _pieces_over(E, P, tgt, E2, budget)
            from_src = _pieces_over(E, P, src, E2, budget)
        except TruncationError as e:
            res.truncated.append(f"{E.obj_id(E2)}: {e}")
            continue
        for h in hs:
            k = B.compose(h, f)
            S = from_tgt.get(B.mor_key(h), (h, ListPiece([], over=h)))[1]
            T = from_src.get(B.mor_key(k), (k, ListPiece([], over=k)))[1]
            res.checked += 1
            pre = lambda x: E.compose(x, m)  # noqa: E731
            if S.linear and T.linear:
                if S.size == 0 or T.size == 0:
                    pass
                ranks, kernels = linear_map_rank(S, T, pre)
                ker = next(((p, v) for p, vs in sorted(kernels.items()) for v in vs), None)
                if ker is not None:
                    p, v = ker
                    k2 = S.combine({q: (v if q == p else (0,) * len(S.basis[q])) for q in S.basis})
                    res.ok = False
                    res.witness = {"g": E.mor_id(pre(S.zero)), "h": B.mor_id(h), "fillers": ">=2",
                                   "examples": [E.mor_id(S.zero), E.mor_id(k2)]}
                    return res
                if S.size != T.size:
                    # injective but not surjective: some g has no filler
                    g = _outside_image(S, T, pre)
                    res.ok = False
                    res.witness = {"g": E.mor_id(g), "h": B.mor_id(h), "fillers": 0}
                    return res
                continue
            try:
                Ss = S.elements(budget)
            except TruncationError as e:
                res.truncated.append(f"{E.obj_id(E2)} over {B.mor_id(h)}: {e}")
                continue
            images: dict = {}
            for x in Ss:
                images.setdefault(E.mor_key(pre(x)), []).append(x)
            # every x . m lies in T, so equal sizes and injectivity suffice
            if len(images) == len(Ss) == T.size:
                continue
            try:
                Ts = T.elements(budget)
            except TruncationError as e:
                res.truncated.append(f"{E.obj_id(E2)} over {B.mor_id(k)}: {e}")
                continue
            for g in Ts:
                n = len(images.get(E.mor_key(g), []))
                if n != 1:
                    res.ok = False
                    res.witness = {"g": E.mor_id(g), "h": B.mor_id(h), "fillers": n,
                                   "examples": [E.mor_id(x) for x in images.get(E.mor_key(g), [])[:2]]}
                    return res
    return res


def _outside_image(S: LinearPiece, T: LinearPiece, fn):
    from . import linalg

    for p, basis in T.basis.items():
        n = len(basis)
        cols = [T.coords(fn(b)).get(p, (0,) * n) for b in S.basis.get(p, [])]
        r = linalg.rank(cols, n, p)
        for j in range(n):
            e = tuple(1 if i == j else 0 for i in range(n))
            if linalg.rank(cols + [e], n, p) > r:
                return basis[j]
    return T.zero


def verify_opfibration(P: Functor, lift: Callable[[str, Any], Any], budget: int = DEFAULT_BUDGET,
                       name: str = "opfibration", objects: list | None = None) -> ValidationReport:
    """Every base morphism has the given opcartesian lift at every object."""
    E, B = P.source, P.target
    rep = ValidationReport(f"{name}: verify_opfibration")
    objs = objects if objects is not None else E.objects()
    by_base: dict[str, list] = {}
    for x in objs:
        by_base.setdefault(B.obj_id(P.obj(x)), []).append(x)
    for a in B.objects():
        for b in B.objects():
            for f in B.hom(a, b):
                for X in by_base.get(B.obj_id(a), []):
                    datum = f"cleavage[{B.mor_id(f)}, {E.obj_id(X)}]"
                    try:
                        m = lift(f, X)
                    except TruncationError as e:
                        rep.truncated("lift", str(e), datum)
                        continue
                    except (KeyError, StructuralError) as e:
                        rep.structural("cleavage.missing", f"no lift: {e}", datum)
                        continue
                    if m is None:
                        rep.structural("cleavage.missing", "no lift", datum)
                        continue
                    if E.source(m) != X:
                        rep.law("cleavage.source", "lift does not start at the object", datum, E.mor_id(m))
                        continue
                    if not E.has_object(E.target(m)):
                        rep.truncated("lift", "lift target outside universe", datum)
                        continue
                    if not B.same_morphism(P.mor(m), f):
                        rep.law("cleavage.over", "lift does not lie over the base morphism", datum, E.mor_id(m))
                        continue
                    r = is_opcartesian(P, m, budget)
                    rep.checked += 1
                    for t in r.truncated[:3]:
                        rep.truncated("opcartesian", t, datum)
                    if not r.ok:
                        w = r.witness or {}
                        rep.law("cleavage.opcartesian", f"lift is not opcartesian (g={w.get('g')}, "
                                f"h={w.get('h')}, fillers={w.get('fillers')})", datum, E.mor_id(m))
    return rep


# ---------------------------------------------------------------------------
# Monoidal verification


def _fibre_objects(M: MonoidalOpfibration) -> dict[str, list]:
    out: dict[str, list] = {b: [] for b in M.base.objects()}
    for x in M.total.objects():
        out[M.P.obj(x)].append(x)
    return out


def _fibre_gens(M: MonoidalOpfibration, X, Y, budget: int) -> list:
    """Generators of the fibre hom-set X -> Y (morphisms over an identity)."""
    b = M.P.obj(X)
    idb = M.base.identity(b)
    out = []
    for img, piece in _pieces_by_image(M.total, M.P, X, Y, budget):
        if M.base.same_morphism(img, idb):
            out.extend(piece.generators(budget))
    return out


def _tensor_closed_tuples(M: MonoidalOpfibration, objs: list, arity: int):
    """Tuples whose iterated tensors (both bracketings) stay in the universe."""
    T = M.tensor_obj
    inu = M.in_universe
    if arity == 2:
        for X in objs:
            for Y in objs:
                if inu(T(X, Y)):
                    yield (X, Y)
    elif arity == 3:
        for X in objs:
            for Y in objs:
                XY = T(X, Y)
                if not inu(XY):
                    continue
                for Z in objs:
                    YZ = T(Y, Z)
                    if inu(YZ) and inu(T(XY, Z)) and inu(T(X, YZ)):
                        yield (X, Y, Z)
    elif arity == 4:
        for X, Y, Z in _tensor_closed_tuples(M, objs, 3):
            XY, YZ = T(X, Y), T(Y, Z)
            XYZ = T(XY, Z)
            for W in objs:
                WX = T(W, X)
                if not (inu(WX) and inu(T(W, XY)) and inu(T(W, XYZ)) and inu(T(WX, Y))
                        and inu(T(T(WX, Y), Z)) and inu(T(T(W, XY), Z)) and inu(T(W, YZ))
                        and inu(T(W, T(X, YZ))) and inu(T(WX, YZ)) and inu(T(T(WX, Y), Z))):
                    continue
                yield (W, X, Y, Z)


def _check_struct_iso(M: MonoidalOpfibration, rep: ValidationReport, check: str, datum: str, a, src, tgt,
                      budget: int) -> bool:
    E = M.total
    if E.source(a) != src or E.target(a) != tgt:
        rep.law(f"{check}.type", f"component has wrong endpoints (expected {E.obj_id(src)} -> {E.obj_id(tgt)})",
                datum, E.mor_id(a))
        return False
    if not M.base.is_identity(M.P.mor(a)):
        rep.law(f"{check}.over", "component does not lie over an identity", datum, E.mor_id(a))
        return False
    try:
        if E.inverse(a, budget) is None:
            rep.law(f"{check}.iso", "component is not invertible", datum, E.mor_id(a))
            return False
    except TruncationError as e:
        rep.truncated(f"{check}.iso", str(e), datum)
    return True


def verify_monoidal_opfibration(M: MonoidalOpfibration, budget: int = DEFAULT_BUDGET,
                                check_cleavage: bool = False) -> ValidationReport:
    """Check ids: (a) tensor, (b) unit, (c) structure isos, (d) coherence.

    Morphism quantifiers use the reduction "naturality/functoriality for all
    morphisms over f" <= "for chosen lifts, and for fibre generators one
    variable at a time", valid because every morphism over f factors as a
    fibre morphism after the chosen lift.
    """
    E, B, P = M.total, M.base, M.P
    rep = ValidationReport(f"{M.name}: verify_monoidal_opfibration")
    if check_cleavage:
        rep.extend(verify_opfibration(P, M.lift, budget, M.name), "opfibration")
    fib = _fibre_objects(M)
    T = M.tensor_obj
    inu = M.in_universe

    # (a) tensor ----------------------------------------------------------
    pairs: dict[str, list] = {b: list(_tensor_closed_tuples(M, xs, 2)) for b, xs in fib.items()}
    skipped = sum(len(xs) ** 2 for xs in fib.values()) - sum(len(v) for v in pairs.values())
    if skipped:
        rep.truncated("a.universe", f"{skipped} object pairs have tensor outside the universe; not checked")
    for b, ps in pairs.items():
        for X, Y in ps:
            XY = T(X, Y)
            if P.obj(XY) != b:
                rep.law("a.over", "tensor leaves the fibre", E.obj_id(X), E.obj_id(Y))
            rep.checked += 1
            i = M.tensor_mor(E.identity(X), E.identity(Y))
            if not E.same_morphism(i, E.identity(XY)):
                rep.law("a.functor.identity", "id (x) id != id", E.obj_id(X), E.obj_id(Y))
    # per-variable functoriality and interchange in fibres
    for b, xs in fib.items():
        closed = {(E.obj_id(X), E.obj_id(Y)) for X, Y in pairs[b]}
        ok2 = lambda X, Y: (E.obj_id(X), E.obj_id(Y)) in closed  # noqa: E731
        gcache: dict = {}

        def gens(X, Y):
            key = (E.obj_id(X), E.obj_id(Y))
            if key not in gcache:
                try:
                    gcache[key] = _fibre_gens(M, X, Y, budget)
                except TruncationError as e:
                    rep.truncated("a.functor", str(e), *key)
                    gcache[key] = None
            return gcache[key]

        idm = {E.obj_id(X): E.identity(X) for X in xs}
        for X in xs:
            for X2 in xs:
                us = gens(X, X2)
                if not us:
                    continue
                iX, iX2 = idm[E.obj_id(X)], idm[E.obj_id(X2)]
                for Y in xs:
                    iY = idm[E.obj_id(Y)]
                    for left in (True, False):
                        # u in the left (resp. right) variable, 1_Y in the other
                        if left and not (ok2(X, Y) and ok2(X2, Y)):
                            continue
                        if not left and not (ok2(Y, X) and ok2(Y, X2)):
                            continue
                        tens = (lambda m, i=iY: M.tensor_mor(m, i)) if left else (lambda m, i=iY: M.tensor_mor(i, m))
                        uY = [tens(u) for u in us]
                        for X3 in xs:
                            if not (ok2(X3, Y) if left else ok2(Y, X3)):
                                continue
                            ws = gens(X2, X3)
                            if not ws:
                                continue
                            wY = [tens(w) for w in ws]
                            for u, ut in zip(us, uY):
                                for w, wt in zip(ws, wY):
                                    rep.checked += 1
                                    if not E.same_morphism(tens(E.compose(w, u)), E.compose(wt, ut)):
                                        side = "(w.u) (x) 1" if left else "1 (x) (w.u)"
                                        rep.law("a.functor.composition", f"{side} is not the composite",
                                                E.mor_id(w), E.mor_id(u), E.obj_id(Y))
                    if not (ok2(X, Y) and ok2(X2, Y)):
                        continue
                    uY = [M.tensor_mor(u, iY) for u in us]
                    for Y2 in xs:
                        if not (ok2(X, Y2) and ok2(X2, Y2)):
                            continue
                        vs = gens(Y, Y2)
                        if not vs:
                            continue
                        iY2 = idm[E.obj_id(Y2)]
                        X2v = [M.tensor_mor(iX2, v) for v in vs]
                        Xv = [M.tensor_mor(iX, v) for v in vs]
                        for u, ut in zip(us, uY):
                            ut2 = M.tensor_mor(u, iY2)
                            for v, a2, a1 in zip(vs, X2v, Xv):
                                rep.checked += 1
                                uv = M.tensor_mor(u, v)
                                if not (E.same_morphism(E.compose(a2, ut), uv)
                                        and E.same_morphism(E.compose(ut2, a1), uv)):
                                    rep.law("a.functor.interchange", "(1 (x) v)(u (x) 1) != u (x) v",
                                            E.mor_id(u), E.mor_id(v))
    # pairs of opcartesian lifts go to opcartesian morphisms over the same f
    for a in B.objects():
        for b in B.objects():
            for f in B.hom(a, b):
                for X, Y in pairs[a]:
                    datum = f"tensor[{f}; {E.obj_id(X)}, {E.obj_id(Y)}]"
                    try:
                        lx, ly = M.lift(f, X), M.lift(f, Y)
                        t = M.tensor_mor(lx, ly)
                    except TruncationError as e:
                        rep.truncated("a.opcartesian", str(e), datum)
                        continue
                    if not inu(E.target(t)):
                        rep.truncated("a.opcartesian", "image outside universe", datum)
                        continue
                    if not B.same_morphism(P.mor(t), f):
                        rep.law("a.over", "tensor of lifts does not lie over f", datum)
                        continue
                    r = is_opcartesian(P, t, budget)
                    rep.checked += 1
                    if not r.ok:
                        rep.law("a.opcartesian", f"tensor of opcartesian lifts is not opcartesian ({r.witness})",
                                datum, E.mor_id(t))

    # (b) unit --------------------------------------------------------------
    U = M.unit_functor()
    for b in B.objects():
        I = M.unit_obj(b)
        if not E.has_object(I):
            rep.law("b.unit_obj", "unit object outside the total category", f"unit_obj[{b}]")
            continue
        if P.obj(I) != b:
            rep.law("b.section", "P(I(b)) != b", f"unit_obj[{b}]", E.obj_id(I))
    for f in B.morphism_ids():
        datum = f"unit[{f}]"
        try:
            u = M.unit_mor(f)
        except (KeyError, StructuralError) as e:
            rep.structural("b.unit", f"unit undefined: {e}", datum)
            continue
        if E.source(u) != M.unit_obj(B.source(f)) or E.target(u) != M.unit_obj(B.target(f)):
            rep.law("b.unit.type", "I(f) has wrong endpoints", datum, E.mor_id(u))
            continue
        if not B.same_morphism(P.mor(u), f):
            rep.law("b.section", "P(I(f)) != f", datum, E.mor_id(u))
            continue
        r = is_opcartesian(P, u, budget)
        rep.checked += 1
        if not r.ok:
            rep.law("b.opcartesian", f"I(f) is not opcartesian ({r.witness})", datum, E.mor_id(u))
    urep = validate_functor(U, budget)
    rep.extend(urep, "b.unit_functor")

    # (c) structure isomorphisms ------------------------------------------
    triples: dict[str, list] = {b: list(_tensor_closed_tuples(M, xs, 3)) for b, xs in fib.items()}
    for b, ts in triples.items():
        for X, Y, Z in ts:
            datum = f"assoc[{E.obj_id(X)}, {E.obj_id(Y)}, {E.obj_id(Z)}]"
            a = M.assoc(X, Y, Z)
            rep.checked += 1
            _check_struct_iso(M, rep, "c.assoc", datum, a, T(T(X, Y), Z), T(X, T(Y, Z)), budget)
    for b, xs in fib.items():
        I = M.unit_obj(b)
        for X in xs:
            if inu(T(I, X)):
                datum = f"lunit[{E.obj_id(X)}]"
                rep.checked += 1
                _check_struct_iso(M, rep, "c.lunit", datum, M.lunit(X), T(I, X), X, budget)
            if inu(T(X, I)):
                datum = f"runit[{E.obj_id(X)}]"
                rep.checked += 1
                _check_struct_iso(M, rep, "c.runit", datum, M.runit(X), T(X, I), X, budget)
    _naturality_assoc(M, rep, triples, budget)
    _naturality_unitors(M, rep, fib, budget)

    # (d) coherence -------------------------------------------------------
    for b, xs in fib.items():
        for W, X, Y, Z in _tensor_closed_tuples(M, xs, 4):
            rep.checked += 1
            lhs = E.compose(M.assoc(W, X, T(Y, Z)), M.assoc(T(W, X), Y, Z))
            rhs = E.compose(M.tensor_mor(E.identity(W), M.assoc(X, Y, Z)),
                            E.compose(M.assoc(W, T(X, Y), Z),
                                      M.tensor_mor(M.assoc(W, X, Y), E.identity(Z))))
            if not E.same_morphism(lhs, rhs):
                rep.law("d.pentagon", "pentagon does not commute",
                        *(E.obj_id(v) for v in (W, X, Y, Z)),
                        *_assoc_data(M, (W, X, T(Y, Z)), (T(W, X), Y, Z), (X, Y, Z), (W, T(X, Y), Z), (W, X, Y)))
        I = M.unit_obj(b)
        for X in xs:
            for Y in xs:
                if not (inu(T(X, Y)) and inu(T(X, I)) and inu(T(I, Y)) and inu(T(T(X, I), Y))):
                    continue
                rep.checked += 1
                lhs = E.compose(M.tensor_mor(E.identity(X), M.lunit(Y)), M.assoc(X, I, Y))
                rhs = M.tensor_mor(M.runit(X), E.identity(Y))
                if not E.same_morphism(lhs, rhs):
                    rep.law("d.triangle", "triangle does not commute", E.obj_id(X), E.obj_id(Y),
                            f"assoc[{E.obj_id(X)}, {E.obj_id(I)}, {E.obj_id(Y)}]")
    strict = _is_strict(M, fib, triples)
    rep.note(f"strict={strict}")
    return rep


def _assoc_data(M, *triples) -> list[str]:
    return [f"assoc[{', '.join(M.total.obj_id(v) for v in t)}]" for t in triples]


def _is_strict(M: MonoidalOpfibration, fib, triples) -> bool:
    E = M.total
    for b, ts in triples.items():
        for X, Y, Z in ts:
            if not E.is_identity(M.assoc(X, Y, Z)):
                return False
    for b, xs in fib.items():
        I = M.unit_obj(b)
        for X in xs:
            if M.in_universe(M.tensor_obj(I, X)) and not E.is_identity(M.lunit(X)):
                return False
            if M.in_universe(M.tensor_obj(X, I)) and not E.is_identity(M.runit(X)):
                return False
    return True


def _naturality_assoc(M: MonoidalOpfibration, rep: ValidationReport, triples: dict, budget: int) -> None:
    E, B = M.total, M.base
    closed = {b: {tuple(E.obj_id(v) for v in t) for t in ts} for b, ts in triples.items()}
    fib = _fibre_objects(M)
    ids = E.identity
    for b, ts in triples.items():
        xs = fib[b]
        for X, Y, Z in ts:
            iXYZ = (ids(X), ids(Y), ids(Z))
            for pos in range(3):
                for V in xs:
                    new = [X, Y, Z]
                    new[pos] = V
                    if tuple(E.obj_id(v) for v in new) not in closed[b]:
                        continue
                    try:
                        gens = _fibre_gens(M, (X, Y, Z)[pos], V, budget)
                    except TruncationError as e:
                        rep.truncated("c.assoc.naturality", str(e))
                        continue
                    a_new, a_old = M.assoc(*new), M.assoc(X, Y, Z)
                    for u in gens:
                        ms = [iXYZ[0], iXYZ[1], iXYZ[2]]
                        ms[pos] = u
                        rep.checked += 1
                        lhs = E.compose(a_new, M.tensor_mor(M.tensor_mor(ms[0], ms[1]), ms[2]))
                        rhs = E.compose(M.tensor_mor(ms[0], M.tensor_mor(ms[1], ms[2])), a_old)
                        if not E.same_morphism(lhs, rhs):
                            rep.law("c.assoc.naturality", "associator is not natural",
                                    f"assoc[{', '.join(E.obj_id(v) for v in (X, Y, Z))}]", E.mor_id(u))
            # naturality along chosen lifts of base morphisms out of b
            for c in B.objects():
                for f in B.hom(b, c):
                    if B.is_identity(f):
                        continue
                    try:
                        lx, ly, lz = M.lift(f, X), M.lift(f, Y), M.lift(f, Z)
                    except TruncationError:
                        continue
                    tgt = (E.target(lx), E.target(ly), E.target(lz))
                    if tuple(E.obj_id(v) for v in tgt) not in closed.get(c, ()):
                        continue
                    rep.checked += 1
                    lhs = E.compose(M.assoc(*tgt), M.tensor_mor(M.tensor_mor(lx, ly), lz))
                    rhs = E.compose(M.tensor_mor(lx, M.tensor_mor(ly, lz)), M.assoc(X, Y, Z))
                    if not E.same_morphism(lhs, rhs):
                        rep.law("c.assoc.naturality", f"associator not natural along lifts of {f}",
                                f"assoc[{', '.join(E.obj_id(v) for v in (X, Y, Z))}]",
                                f"assoc[{', '.join(E.obj_id(v) for v in tgt)}]")


def _naturality_unitors(M: MonoidalOpfibration, rep: ValidationReport, fib: dict, budget: int) -> None:
    E, B, T = M.total, M.base, M.tensor_obj
    inu = M.in_universe
    for b, xs in fib.items():
        I = M.unit_obj(b)
        iI = E.identity(I)
        for X in xs:
            for Y in xs:
                l_ok = inu(T(I, X)) and inu(T(I, Y))
                r_ok = inu(T(X, I)) and inu(T(Y, I))
                if not (l_ok or r_ok):
                    continue
                try:
                    gens = _fibre_gens(M, X, Y, budget)
                except TruncationError as e:
                    rep.truncated("c.unitors.naturality", str(e))
                    continue
                for u in gens:
                    rep.checked += 1
                    if l_ok and not E.same_morphism(E.compose(M.lunit(Y), M.tensor_mor(iI, u)),
                                                    E.compose(u, M.lunit(X))):
                        rep.law("c.lunit.naturality", "left unitor is not natural", f"lunit[{E.obj_id(X)}]",
                                E.mor_id(u))
                    if r_ok and not E.same_morphism(E.compose(M.runit(Y), M.tensor_mor(u, iI)),
                                                    E.compose(u, M.runit(X))):
                        rep.law("c.runit.naturality", "right unitor is not natural", f"runit[{E.obj_id(X)}]",
                                E.mor_id(u))
        for c in B.objects():
            for f in B.hom(b, c):
                if B.is_identity(f):
                    continue
                uf = M.unit_mor(f)
                J = M.unit_obj(c)
                for X in xs:
                    try:
                        lx = M.lift(f, X)
                    except TruncationError:
                        continue
                    FX = E.target(lx)
                    if inu(T(I, X)) and inu(T(J, FX)):
                        rep.checked += 1
                        if not E.same_morphism(E.compose(M.lunit(FX), M.tensor_mor(uf, lx)),
                                               E.compose(lx, M.lunit(X))):
                            rep.law("c.lunit.naturality", f"left unitor not natural along {f}",
                                    f"lunit[{E.obj_id(X)}]", f"unit[{f}]")
                    if inu(T(X, I)) and inu(T(FX, J)):
                        rep.checked += 1
                        if not E.same_morphism(E.compose(M.runit(FX), M.tensor_mor(lx, uf)),
                                               E.compose(lx, M.runit(X))):
                            rep.law("c.runit.naturality", f"right unitor not natural along {f}",
                                    f"runit[{E.obj_id(X)}]", f"unit[{f}]")


def verify_symmetry(M: MonoidalOpfibration, budget: int = DEFAULT_BUDGET) -> ValidationReport:
    """Hexagons, involutivity and naturality of the braiding in every fibre."""
    if not M.symmetric:
        raise StructuralError("not claimed symmetric")
    E, B, T = M.total, M.base, M.tensor_obj
    inu = M.in_universe
    rep = ValidationReport(f"{M.name}: verify_symmetry")
    fib = _fibre_objects(M)
    bid = lambda X, Y: f"braid[{E.obj_id(X)}, {E.obj_id(Y)}]"  # noqa: E731
    for b, xs in fib.items():
        pairs = list(_tensor_closed_tuples(M, xs, 2))
        pair_ids = {(E.obj_id(X), E.obj_id(Y)) for X, Y in pairs}
        for X, Y in pairs:
            if (E.obj_id(Y), E.obj_id(X)) not in pair_ids:
                continue
            c = M.braid(X, Y)
            rep.checked += 1
            if not _check_struct_iso(M, rep, "braid", bid(X, Y), c, T(X, Y), T(Y, X), budget):
                continue
            if not E.is_identity(E.compose(M.braid(Y, X), c)):
                rep.law("braid.involution", "braid(Y,X) . braid(X,Y) != id", bid(X, Y))
            for X2 in xs:
                if not (inu(T(X2, Y)) and inu(T(Y, X2))):
                    continue
                try:
                    gens = _fibre_gens(M, X, X2, budget)
                except TruncationError as e:
                    rep.truncated("braid.naturality", str(e))
                    continue
                iY = E.identity(Y)
                for u in gens:
                    rep.checked += 1
                    lhs = E.compose(M.braid(X2, Y), M.tensor_mor(u, iY))
                    rhs = E.compose(M.tensor_mor(iY, u), c)
                    if not E.same_morphism(lhs, rhs):
                        rep.law("braid.naturality", "braiding is not natural", bid(X, Y), E.mor_id(u))
            for cc in B.objects():
                for f in B.hom(b, cc):
                    if B.is_identity(f):
                        continue
                    lx, ly = M.lift(f, X), M.lift(f, Y)
                    FX, FY = E.target(lx), E.target(ly)
                    if not (inu(T(FX, FY)) and inu(T(FY, FX))):
                        continue
                    rep.checked += 1
                    if not E.same_morphism(E.compose(M.braid(FX, FY), M.tensor_mor(lx, ly)),
                                           E.compose(M.tensor_mor(ly, lx), c)):
                        rep.law("braid.naturality", f"braiding not natural along {f}", bid(X, Y), bid(FX, FY))
        for X, Y, Z in _tensor_closed_tuples(M, xs, 3):
            needed = [T(Y, Z), T(Y, X), T(Z, X), T(T(Y, Z), X), T(Y, T(Z, X)), T(T(Y, X), Z), T(Y, T(X, Z)),
                      T(X, Z), T(Z, Y), T(Z, T(X, Y)), T(T(Z, X), Y), T(X, T(Z, Y)), T(T(X, Z), Y)]
            if not all(inu(v) for v in needed):
                continue
            rep.checked += 1
            lhs = E.compose(M.assoc(Y, Z, X), E.compose(M.braid(X, T(Y, Z)), M.assoc(X, Y, Z)))
            rhs = E.compose(M.tensor_mor(E.identity(Y), M.braid(X, Z)),
                            E.compose(M.assoc(Y, X, Z), M.tensor_mor(M.braid(X, Y), E.identity(Z))))
            if not E.same_morphism(lhs, rhs):
                rep.law("hexagon", "hexagon does not commute", bid(X, Y), bid(X, Z), bid(X, T(Y, Z)))
            # second hexagon, written with inverse associators moved across
            a_inv, b_inv = E.inverse(M.assoc(X, Y, Z), budget), E.inverse(M.assoc(X, Z, Y), budget)
            if a_inv is None or b_inv is None:
                rep.law("hexagon2", "an associator in the hexagon is not invertible",
                        *[f"assoc[{', '.join(map(E.obj_id, t))}]" for t, inv in (((X, Y, Z), a_inv), ((X, Z, Y), b_inv))
                          if inv is None])
                continue
            lhs2 = E.compose(M.braid(T(X, Y), Z), a_inv)
            rhs2 = E.compose(M.assoc(Z, X, Y),
                             E.compose(M.tensor_mor(M.braid(X, Z), E.identity(Y)),
                                       E.compose(b_inv,
                                                 M.tensor_mor(E.identity(X), M.braid(Y, Z)))))
            if not E.same_morphism(lhs2, rhs2):
                rep.law("hexagon2", "second hexagon does not commute", bid(Y, Z), bid(X, Z), bid(T(X, Y), Z))
    return rep


# ---------------------------------------------------------------------------
# Direct images


@dataclass
class DirectImage:
    functor: Functor
    tensor_comparison: dict  # (X id, Y id) -> f_*(X (x) Y) -> f_*X (x) f_*Y
    unit_comparison: Any  # f_*(I_A) -> I_B
    report: ValidationReport


def direct_image_functor(M: MonoidalOpfibration, f: str, budget: int = DEFAULT_BUDGET) -> DirectImage:
    """f_*: E_A -> E_B induced by the cleavage, with its strong monoidal data."""
    B, E, P = M.base, M.total, M.P
    if f not in B.arrows:
        raise StructuralError(f"{f!r} is not a base morphism")
    a, b = B.source(f), B.target(f)
    EA, EB = M.fibre(a), M.fibre(b)
    idb = B.identity(b)
    rep = ValidationReport(f"{M.name}: direct image {f}")

    def on_obj(X):
        return E.target(M.lift(f, X))

    def on_mor(u):
        X, X2 = E.source(u), E.target(u)
        g = E.compose(M.lift(f, X2), u)
        return unique_filler(P, M.lift(f, X), g, idb, budget)

    F = Functor(EA, EB, on_obj, on_mor, f"{f}_*", additive=True)
    T = M.tensor_obj
    comps: dict = {}
    xs = EA.objects()
    for X in xs:
        for Y in xs:
            XY = T(X, Y)
            if not M.in_universe(XY):
                continue
            FX, FY = on_obj(X), on_obj(Y)
            if not M.in_universe(T(FX, FY)):
                continue
            datum = f"comparison[{f}; {E.obj_id(X)}, {E.obj_id(Y)}]"
            g = M.tensor_mor(M.lift(f, X), M.lift(f, Y))
            try:
                phi = unique_filler(P, M.lift(f, XY), g, idb, budget)
            except (StructuralError, TruncationError) as e:
                rep.law("comparison.exists", str(e), datum)
                continue
            rep.checked += 1
            if E.inverse(phi, budget) is None:
                rep.law("comparison.iso", "tensor comparison is not invertible", datum, E.mor_id(phi))
            comps[(E.obj_id(X), E.obj_id(Y))] = phi
    IA, IB = M.unit_obj(a), M.unit_obj(b)
    eps = None
    try:
        eps = unique_filler(P, M.lift(f, IA), M.unit_mor(f), idb, budget)
        if E.inverse(eps, budget) is None:
            rep.law("unit_comparison.iso", "unit comparison is not invertible", f"unit[{f}]")
    except (StructuralError, TruncationError) as e:
        rep.law("unit_comparison.exists", str(e), f"unit[{f}]")
    # coherence squares
    for X, Y, Z in _tensor_closed_tuples(M, xs, 3):
        FX, FY, FZ = on_obj(X), on_obj(Y), on_obj(Z)
        key = lambda U, V: (E.obj_id(U), E.obj_id(V))  # noqa: E731
        need = [key(X, Y), key(T(X, Y), Z), key(Y, Z), key(X, T(Y, Z))]
        if not all(k in comps for k in need):
            continue
        if not all(M.in_universe(v) for v in (T(T(FX, FY), FZ), T(FX, T(FY, FZ)))):
            continue
        rep.checked += 1
        lhs = E.compose(M.assoc(FX, FY, FZ),
                        E.compose(M.tensor_mor(comps[key(X, Y)], E.identity(FZ)), comps[key(T(X, Y), Z)]))
        rhs = E.compose(M.tensor_mor(E.identity(FX), comps[key(Y, Z)]),
                        E.compose(comps[key(X, T(Y, Z))], on_mor(M.assoc(X, Y, Z))))
        if not E.same_morphism(lhs, rhs):
            rep.law("strong.assoc", "comparison incompatible with associators",
                    *(E.obj_id(v) for v in (X, Y, Z)))
    if eps is not None:
        for X in xs:
            FX = on_obj(X)
            if (E.obj_id(IA), E.obj_id(X)) in comps and M.in_universe(T(IB, FX)):
                rep.checked += 1
                lhs = E.compose(M.lunit(FX), E.compose(M.tensor_mor(eps, E.identity(FX)),
                                                       comps[(E.obj_id(IA), E.obj_id(X))]))
                if not E.same_morphism(lhs, on_mor(M.lunit(X))):
                    rep.law("strong.lunit", "comparison incompatible with left unitors", E.obj_id(X))
            if (E.obj_id(X), E.obj_id(IA)) in comps and M.in_universe(T(FX, IB)):
                rep.checked += 1
                lhs = E.compose(M.runit(FX), E.compose(M.tensor_mor(E.identity(FX), eps),
                                                       comps[(E.obj_id(X), E.obj_id(IA))]))
                if not E.same_morphism(lhs, on_mor(M.runit(X))):
                    rep.law("strong.runit", "comparison incompatible with right unitors", E.obj_id(X))
    return DirectImage(F, comps, eps, rep)


def natural_iso_between(F: Functor, G: Functor, budget: int = DEFAULT_BUDGET):
    """Find components X -> iso F(X) -> G(X) forming a natural isomorphism.

    Components are unique when every object's candidate set is a singleton
    after imposing naturality against identities; we require each hom-set
    F(X) -> G(X) to contain exactly one iso compatible with naturality on
    generators.  Returns (components dict or None, report).
    """
    from .fincat import NatTrans, validate_nat_trans

    C, D = F.source, F.target
    rep = ValidationReport(f"natural iso {F.name} => {G.name}")
    comps = {}
    for X in C.objects():
        FX, GX = F.obj(X), G.obj(X)
        if D.obj_id(FX) != D.obj_id(GX) and not D.has_object(GX):
            rep.law("object", "image outside target", C.obj_id(X))
            continue
        if D.same_morphism(D.identity(FX), D.identity(GX)) if FX == GX else False:
            comps[X] = D.identity(FX)
            continue
        try:
            isos = find_isomorphisms(D, FX, GX, budget)
        except TruncationError as e:
            rep.truncated("search", str(e), C.obj_id(X))
            continue
        if not isos:
            rep.law("object", "F(X) and G(X) are not isomorphic", C.obj_id(X))
            continue
        comps[X] = isos[0][0]
    if not rep.ok:
        return None, rep
    eta = NatTrans(F, G, comps, "eta", iso=True)
    rep.extend(validate_nat_trans(eta, budget=budget))
    return (comps if rep.ok else None), rep


# ---------------------------------------------------------------------------
# Grothendieck construction


def grothendieck_construction(data: IndexedMonoidal, name: str | None = None,
                              check: bool = True) -> tuple[MonoidalOpfibration, ValidationReport]:
    """Total category of indexed monoidal data with its monoidal structure.

    Objects are pairs (b, X); a morphism (a, X) -> (b, Y) is (f, m) with
    f: a -> b and m: f_* X -> Y in the fibre over b.  The report records
    pseudofunctor coherence failures with the failing base triple.
    """
    B = data.base
    E = GrothendieckTotal(data)
    rep = ValidationReport(f"grothendieck construction {data.name}")
    if check:
        _check_pseudofunctor(data, rep)
    P = Functor(E, B, lambda x: x[0], lambda m: m.f, f"P_{data.name}", additive=True,
                piece_image=lambda piece: piece.over)

    def lift(f, X):
        b = B.target(f)
        fib = data.fibres[b]
        fx = data.transition(f).obj(X[1])
        if not fib.has_object(fx):
            raise TruncationError("direct image", "fibre universe", f"{f} at {E.obj_id(X)}")
        return GMor(X, (b, fx), f, fib.identity(fx))

    def tensor_obj(X, Y):
        if X[0] != Y[0]:
            raise StructuralError("tensor of objects in different fibres")
        return (X[0], data.fibres[X[0]].tensor_obj(X[1], Y[1]))

    def tensor_mor(u: GMor, v: GMor) -> GMor:
        if u.f != v.f:
            raise StructuralError("tensor of morphisms over different base morphisms")
        b = u.tgt[0]
        fib = data.fibres[b]
        m = fib.tensor_mor(u.m, v.m)
        if not data.strict:
            m = fib.compose(m, data.tensor_comparison(u.f, u.src[1], v.src[1]))
        return GMor(tensor_obj(u.src, v.src), tensor_obj(u.tgt, v.tgt), u.f, m)

    def unit_obj(b):
        return (b, data.fibres[b].unit())

    def unit_mor(f):
        a, b = B.source(f), B.target(f)
        return GMor(unit_obj(a), unit_obj(b), f, data.unit_comparison(f))

    def in_fibre(b, m, src):
        fib = data.fibres[b]
        if not data.strict:
            m = fib.compose(m, data.identity_iso(b, src))
        return m

    def assoc(X, Y, Z):
        b = X[0]
        fib = data.fibres[b]
        src = tensor_obj(tensor_obj(X, Y), Z)
        tgt = tensor_obj(X, tensor_obj(Y, Z))
        return GMor(src, tgt, B.identity(b), fib.assoc(X[1], Y[1], Z[1]))

    def lunit(X):
        b = X[0]
        return GMor(tensor_obj(unit_obj(b), X), X, B.identity(b), data.fibres[b].lunit(X[1]))

    def runit(X):
        b = X[0]
        return GMor(tensor_obj(X, unit_obj(b)), X, B.identity(b), data.fibres[b].runit(X[1]))

    def braid(X, Y):
        b = X[0]
        return GMor(tensor_obj(X, Y), tensor_obj(Y, X), B.identity(b), data.fibres[b].braid(X[1], Y[1]))

    backends = dict(data.fibres) if data.strict else {}
    symmetric = all(f.symmetric for f in data.fibres.values())
    M = MonoidalOpfibration(B, E, P, lift, tensor_obj, tensor_mor, unit_obj, unit_mor, assoc, lunit, runit,
                            braid if symmetric else None, name or data.name, data, {}, backends)
    return M, rep


def _check_pseudofunctor(data: IndexedMonoidal, rep: ValidationReport) -> None:
    B = data.base
    for f in B.morphism_ids():
        F = data.transition(f)
        a, b = B.source(f), B.target(f)
        for X in data.fibres[a].objects():
            y = F.obj(X)
            if not data.fibres[b].has_object(y):
                rep.truncated("transition", f"{f}_* leaves the universe", f, data.fibres[a].obj_id(X))
    if data.strict:
        # strict transitions: (g f)_* must equal g_* f_* on objects
        for g in B.morphism_ids():
            for f in B.morphism_ids():
                if B.target(f) != B.source(g):
                    continue
                gf = B.compose(g, f)
                Fg, Ff, Fgf = data.transition(g), data.transition(f), data.transition(gf)
                for X in data.fibres[B.source(f)].objects():
                    rep.checked += 1
                    if Fgf.obj(X) != Fg.obj(Ff.obj(X)):
                        rep.law("pseudofunctor.composition", "(g f)_* X != g_* f_* X", g, f,
                                data.fibres[B.source(f)].obj_id(X))
        return
    for h in B.morphism_ids():
        for g in B.morphism_ids():
            if B.target(g) != B.source(h):
                continue
            for f in B.morphism_ids():
                if B.target(f) != B.source(g):
                    continue
                fib = data.fibres[B.target(h)]
                Fh = data.transition(h)
                for X in data.fibres[B.source(f)].objects():
                    rep.checked += 1
                    lhs = fib.compose(Fh.mor(data.composition_iso(g, f, X)),
                                      data.composition_iso(h, B.compose(g, f), X))
                    rhs = fib.compose(data.composition_iso(h, g, data.transition(f).obj(X)),
                                      data.composition_iso(B.compose(h, g), f, X))
                    if not fib.same_morphism(lhs, rhs):
                        rep.law("pseudofunctor.coherence", "composition isos incoherent", h, g, f,
                                data.fibres[B.source(f)].obj_id(X))


def _sample_automorphisms(C: Category, Y, limit: int, scan: int = 256) -> list:
    """Up to ``limit`` distinct automorphisms of Y, identity first.

    A hom-set of at most ``scan`` endomorphisms is searched exhaustively.
    Otherwise linear pieces are sampled with a fixed seed and list pieces
    are scanned in order.
    """
    out = [C.identity(Y)]
    keys = {C.mor_key(out[0])}
    if C.hom_size(Y, Y) <= scan:
        for m, _ in find_isomorphisms(C, Y, Y, scan):
            if len(out) >= limit:
                break
            if C.mor_key(m) not in keys:
                keys.add(C.mor_key(m))
                out.append(m)
        return out
    rng = random.Random(0)
    for piece in C.hom_pieces(Y, Y):
        if piece.linear:
            primes = sorted(piece.basis)
            it = (piece.combine({p: tuple(rng.randrange(p) for _ in piece.basis[p]) for p in primes})
                  for _ in range(scan))
        else:
            it = iter(piece.elements(DEFAULT_BUDGET)[:scan])
        for m in it:
            if len(out) >= limit:
                return out
            k = C.mor_key(m)
            if k not in keys and C.inverse(m) is not None:
                keys.add(k)
                out.append(m)
    return out


def check_lift_uniqueness(P: Functor, lift: Callable[[Any, Any], Any], budget: int = DEFAULT_BUDGET,
                          alternatives: int = 3, name: str = "opfibration",
                          sample: int | None = None, seed: int = 0) -> ValidationReport:
    """Any two opcartesian lifts of (f, X) are joined by exactly one morphism
    over the identity commuting with the lifts.

    The second lift ranges over a . lift(f, X) for a sample of fibre
    automorphisms a of the target.  With ``sample`` set, only that many
    (f, X) pairs are drawn (seeded) instead of all of them.
    """
    E, B = P.source, P.target
    rep = ValidationReport(f"{name}: lift uniqueness")
    by_base: dict[str, list] = {}
    for x in E.objects():
        by_base.setdefault(B.obj_id(P.obj(x)), []).append(x)
    pairs = []
    for a in B.objects():
        for b in B.objects():
            for f in B.hom(a, b):
                for X in by_base.get(B.obj_id(a), []):
                    pairs.append((b, f, X))
    if sample is not None and sample < len(pairs):
        pairs = random.Random(seed).sample(pairs, sample)
        rep.note(f"sampled {sample} lift pairs")
    fibres: dict[str, FibreCategory] = {}
    for b, f, X in pairs:
        bid = B.obj_id(b)
        if bid not in fibres:
            fibres[bid] = FibreCategory(P, b)
        idb = B.identity(b)
        datum = f"cleavage[{B.mor_id(f)}, {E.obj_id(X)}]"
        try:
            m = lift(f, X)
            Y = E.target(m)
            if not E.has_object(Y):
                rep.truncated("lift", "lift target outside universe", datum)
                continue
            for auto in _sample_automorphisms(fibres[bid], Y, alternatives, budget):
                m2 = E.compose(auto, m)
                rep.checked += 1
                if not is_opcartesian(P, m2, budget):
                    rep.law("lift.alternative", "alternative lift is not opcartesian", datum, E.mor_id(m2))
                    continue
                n1 = len(fillers(P, m, m2, idb, budget))
                n2 = len(fillers(P, m2, m, idb, budget))
                if n1 != 1 or n2 != 1:
                    rep.law("lift.unique", f"{n1} and {n2} connecting morphisms", datum, E.mor_id(m2))
        except TruncationError as e:
            rep.truncated("lift", str(e), datum)
        except StructuralError as e:
            rep.structural("lift", str(e), datum)
    return rep
