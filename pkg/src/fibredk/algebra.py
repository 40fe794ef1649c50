"""Monoids and modules in the fibres of a monoidal opfibration.

:class:`FibredAlgebra` enumerates monoid and module objects (up to
isomorphism) from the fibre backends of a :class:`MonoidalOpfibration` and
exposes the lazy categories ``Mon``, ``Comm``, ``Mod`` and ``Mod_c`` with
their projections.  Extension of scalars is computed as a reflexive
coequalizer after transporting carrier and action along the base morphism;
restriction of scalars composes the action with the monoid map.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, NamedTuple

from .fincat import (
    DEFAULT_BUDGET,
    Category,
    FibreCategory,
    Functor,
    HomPiece,
    ListPiece,
    StructuralError,
    TruncationError,
    ValidationReport,
    _pieces_by_image,
    compare_categories,
    linear_equalizer,
    linear_map_rank,
    mapped_piece,
)
from .monoidal import (
    GMor,
    GrothendieckTotal,
    MonoidalOpfibration,
    UnsupportedBackend,
    fillers,
    unique_filler,
    verify_opfibration,
)


# ---------------------------------------------------------------------------
# Objects and morphisms


@dataclass(frozen=True, eq=False)
class MonoidObject:
    R: Any  # carrier, a total object
    mu: Any  # R (x) R -> R over an identity
    eta: Any  # I -> R over an identity
    commutative: bool
    id: str

    def __eq__(self, other) -> bool:
        return isinstance(other, MonoidObject) and self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        return f"MonoidObject({self.id})"


@dataclass(frozen=True, eq=False)
class ModuleObject:
    R: MonoidObject
    M: Any  # carrier over the same base object as R
    kappa: Any  # M (x) R -> M
    id: str

    def __eq__(self, other) -> bool:
        return isinstance(other, ModuleObject) and self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        return f"ModuleObject({self.id})"


class MonHom(NamedTuple):
    src: MonoidObject
    tgt: MonoidObject
    phi: Any


class ModHom(NamedTuple):
    src: ModuleObject
    tgt: ModuleObject
    phi: MonHom
    alpha: Any


def _short(M: MonoidalOpfibration, m) -> str:
    """Compact id of a fibre morphism (payload only when a backend is known)."""
    if isinstance(m, GMor) and m.tgt[0] in M.backends and M.base.is_identity(m.f):
        return M.backends[m.tgt[0]].mor_id(m.m).split(":", 1)[1]
    return M.total.mor_id(m)


def monoid_id(M: MonoidalOpfibration, R, mu, eta) -> str:
    return f"{M.total.obj_id(R)}(mu={_short(M, mu)},eta={_short(M, eta)})"


def module_id(M: MonoidalOpfibration, R: MonoidObject, X, kappa) -> str:
    return f"{M.total.obj_id(X)}(k={_short(M, kappa)})/{R.id}"


# ---------------------------------------------------------------------------
# Validation of candidates


def validate_monoid(M: MonoidalOpfibration, cand: MonoidObject) -> ValidationReport:
    """Associativity, both unit laws and (if flagged) commutativity."""
    E, T = M.total, M.tensor_obj
    rep = ValidationReport(f"monoid {cand.id}")
    R, mu, eta = cand.R, cand.mu, cand.eta
    b = M.P.obj(R)
    I = M.unit_obj(b)
    if E.source(mu) != T(R, R) or E.target(mu) != R:
        rep.structural("monoid.type", "multiplication is not R (x) R -> R", cand.id)
    if E.source(eta) != I or E.target(eta) != R:
        rep.structural("monoid.type", "unit is not I -> R", cand.id)
    for name, m in (("mu", mu), ("eta", eta)):
        if not M.base.is_identity(M.P.mor(m)):
            rep.structural("monoid.fibre", f"{name} does not lie in the fibre of R", cand.id)
    if rep.structural_errors:
        return rep
    iR = E.identity(R)
    rep.checked += 4
    lhs = E.compose(mu, M.tensor_mor(mu, iR))
    rhs = E.compose(E.compose(mu, M.tensor_mor(iR, mu)), M.assoc(R, R, R))
    if not E.same_morphism(lhs, rhs):
        rep.law("monoid.assoc", "associativity square fails", cand.id)
    if not E.same_morphism(E.compose(mu, M.tensor_mor(eta, iR)), M.lunit(R)):
        rep.law("monoid.left_unit", "left unit triangle fails", cand.id)
    if not E.same_morphism(E.compose(mu, M.tensor_mor(iR, eta)), M.runit(R)):
        rep.law("monoid.right_unit", "right unit triangle fails", cand.id)
    if cand.commutative:
        if not M.symmetric:
            rep.structural("monoid.commutative", "commutativity needs a braiding", cand.id)
        elif not E.same_morphism(E.compose(mu, M.braid(R, R)), mu):
            rep.law("monoid.commutative", "mu . braid != mu", cand.id)
    return rep


def is_commutative(M: MonoidalOpfibration, R, mu) -> bool:
    return M.symmetric and M.total.same_morphism(M.total.compose(mu, M.braid(R, R)), mu)


def validate_module(M: MonoidalOpfibration, mod: ModuleObject) -> ValidationReport:
    E, T = M.total, M.tensor_obj
    rep = ValidationReport(f"module {mod.id}")
    R = mod.R
    X, kappa = mod.M, mod.kappa
    if M.P.obj(X) != M.P.obj(R.R):
        rep.structural("module.fibre", "carrier and monoid lie over different base objects", mod.id)
        return rep
    if E.source(kappa) != T(X, R.R) or E.target(kappa) != X:
        rep.structural("module.type", "action is not M (x) R -> M", mod.id)
        return rep
    if not M.base.is_identity(M.P.mor(kappa)):
        rep.structural("module.fibre", "action does not lie in a fibre", mod.id)
        return rep
    iX, iR = E.identity(X), E.identity(R.R)
    rep.checked += 2
    lhs = E.compose(kappa, M.tensor_mor(kappa, iR))
    rhs = E.compose(E.compose(kappa, M.tensor_mor(iX, R.mu)), M.assoc(X, R.R, R.R))
    if not E.same_morphism(lhs, rhs):
        rep.law("module.assoc", "action associativity fails", mod.id)
    if not E.same_morphism(E.compose(kappa, M.tensor_mor(iX, R.eta)), M.runit(X)):
        rep.law("module.unit", "action unit law fails", mod.id)
    return rep


def monoid_morphism_issues(M: MonoidalOpfibration, src: MonoidObject, tgt: MonoidObject, phi) -> list[str]:
    """The violated squares (empty iff phi is a monoid morphism)."""
    E = M.total
    out = []
    f = M.P.mor(phi)
    if E.source(phi) != src.R or E.target(phi) != tgt.R:
        return ["endpoints"]
    if not E.same_morphism(E.compose(phi, src.mu), E.compose(tgt.mu, M.tensor_mor(phi, phi))):
        out.append("multiplication")
    target_unit = tgt.eta
    if not E.same_morphism(E.compose(phi, src.eta), E.compose(target_unit, M.unit_mor(f))):
        out.append("unit")
    return out


def module_morphism_issues(M: MonoidalOpfibration, x: ModuleObject, y: ModuleObject, phi: MonHom, alpha) -> list[str]:
    """P(phi) = P(alpha) and the equivariance square."""
    E = M.total
    if not M.base.same_morphism(M.P.mor(phi.phi), M.P.mor(alpha)):
        return ["base: P(phi) != P(alpha)"]
    lhs = E.compose(y.kappa, M.tensor_mor(alpha, phi.phi))
    rhs = E.compose(alpha, x.kappa)
    if not E.same_morphism(lhs, rhs):
        return ["equivariance square fails"]
    return []


# ---------------------------------------------------------------------------
# Helpers on total hom pieces


def _total_pieces(M: MonoidalOpfibration, X, Y, f, bounded: bool = True) -> list[HomPiece]:
    E = M.total
    inner = E.total if isinstance(E, FibreCategory) else E
    if isinstance(inner, GrothendieckTotal):
        return [p for p in inner.hom_pieces(X, Y, bounded=bounded) if p.over == f]
    return [p for img, p in _pieces_by_image(E, M.P, X, Y, DEFAULT_BUDGET) if M.base.same_morphism(img, f)]


# ---------------------------------------------------------------------------
# Categories


class MonCategory(Category):
    def __init__(self, alg: "FibredAlgebra", monoids: list[MonoidObject], name: str = "Mon"):
        self.alg = alg
        self.M = alg.M
        self._objs = list(monoids)
        self._ids = {m.id for m in monoids}
        self.name = name
        self._cache: dict = {}

    def objects(self):
        return list(self._objs)

    def has_object(self, x) -> bool:
        return isinstance(x, MonoidObject) and x.id in self._ids

    def obj_id(self, x) -> str:
        return x.id

    def mor_id(self, m: MonHom) -> str:
        return f"{m.src.id}=>{m.tgt.id}:{self.M.total.mor_id(m.phi)}"

    def source(self, m):
        return m.src

    def target(self, m):
        return m.tgt

    def identity(self, x):
        return MonHom(x, x, self.M.total.identity(x.R))

    def compose(self, g: MonHom, f: MonHom) -> MonHom:
        return MonHom(f.src, g.tgt, self.M.total.compose(g.phi, f.phi))

    def hom_pieces(self, x, y) -> list[HomPiece]:
        key = (x.id, y.id)
        if key not in self._cache:
            out = []
            M = self.M
            for img, piece in _pieces_by_image(M.total, M.P, x.R, y.R, self.alg.budget):
                ms = [MonHom(x, y, phi) for phi in piece.elements(self.alg.budget)
                      if not monoid_morphism_issues(M, x, y, phi)]
                out.append(ListPiece(ms, over=img))
            self._cache[key] = out
        return self._cache[key]

    def inverse(self, m: MonHom, budget: int = DEFAULT_BUDGET):
        inv = self.M.total.inverse(m.phi, budget)
        if inv is None:
            return None
        return MonHom(m.tgt, m.src, inv)


class ModCategory(Category):
    def __init__(self, alg: "FibredAlgebra", modules: list[ModuleObject], mon: MonCategory, name: str = "Mod"):
        self.alg = alg
        self.M = alg.M
        self.mon = mon
        self._objs = list(modules)
        self._ids = {m.id for m in modules}
        self.name = name
        self._cache: dict = {}

    def objects(self):
        return list(self._objs)

    def has_object(self, x) -> bool:
        return isinstance(x, ModuleObject) and x.id in self._ids

    def obj_id(self, x) -> str:
        return x.id

    def mor_id(self, m: ModHom) -> str:
        E = self.M.total
        return f"{m.src.id}=>{m.tgt.id}:({E.mor_id(m.phi.phi)};{E.mor_id(m.alpha)})"

    def source(self, m):
        return m.src

    def target(self, m):
        return m.tgt

    def identity(self, x):
        return ModHom(x, x, self.mon.identity(x.R), self.M.total.identity(x.M))

    def compose(self, g: ModHom, f: ModHom) -> ModHom:
        return ModHom(f.src, g.tgt, self.mon.compose(g.phi, f.phi), self.M.total.compose(g.alpha, f.alpha))

    def hom_pieces(self, x, y) -> list[HomPiece]:
        key = (x.id, y.id)
        if key not in self._cache:
            self._cache[key] = [self.alg.equivariant_piece(x, y, phi) for phi in self.mon.hom(x.R, y.R)]
        return self._cache[key]

    def inverse(self, m: ModHom, budget: int = DEFAULT_BUDGET):
        a = self.M.total.inverse(m.alpha, budget)
        p = self.mon.inverse(m.phi, budget)
        if a is None or p is None:
            return None
        return ModHom(m.tgt, m.src, p, a)


# ---------------------------------------------------------------------------
# The builder


@dataclass
class AlgebraConfig:
    monoid_bound: int = 3  # carrier cardinality
    monoid_max_dim: int | None = None  # per-prime dimension cap (linear backends)
    module_bound: int | None = None  # carrier cardinality; default: fibre universe
    budget: int = DEFAULT_BUDGET


@dataclass
class ExtensionResult:
    module: ModuleObject  # canonical representative of M (x)_R S
    unit: ModHom  # opcartesian morphism over phi
    carrier: Any  # raw quotient object before canonicalization
    action: Any  # raw action on it
    quotient: Any  # the coequalizer map M' (x) S -> carrier


class FibredAlgebra:
    """Mon(P), Comm(P), Mod(P), Mod_c(P) with their projections and cleavages."""

    def __init__(self, M: MonoidalOpfibration, config: AlgebraConfig | None = None):
        self.M = M
        self.config = config or AlgebraConfig()
        self.budget = self.config.budget
        self.report = ValidationReport(f"{M.name}: algebra build")
        self._monoid_index: dict = {}
        self._module_index: dict = {}
        self._ext_cache: dict = {}
        monoids = self._enumerate_monoids()
        self.Mon = MonCategory(self, monoids, f"Mon({M.name})")
        self.Comm = MonCategory(self, [r for r in monoids if r.commutative], f"Comm({M.name})")
        modules = self._enumerate_modules(monoids)
        self.Mod = ModCategory(self, modules, self.Mon, f"Mod({M.name})")
        self.Mod_c = ModCategory(self, [x for x in modules if x.R.commutative], self.Comm, f"Mod_c({M.name})")

    # enumeration -----------------------------------------------------------

    def _card(self, fib, x) -> int:
        return fib.card(x) if hasattr(fib, "card") else x

    def _monoid_carriers(self, b: str, fib) -> list:
        c = self.config
        out = []
        for x in fib.objects():
            if self._card(fib, x) > c.monoid_bound:
                continue
            if c.monoid_max_dim is not None and isinstance(x, tuple) and any(d > c.monoid_max_dim for d in x):
                continue
            out.append(x)
        return out

    def _module_carriers(self, fib) -> list:
        bound = self.config.module_bound
        return [x for x in fib.objects() if bound is None or self._card(fib, x) <= bound]

    def _enumerate_monoids(self) -> list[MonoidObject]:
        M = self.M
        out = []
        for b in M.base.objects():
            fib = M.backend(b)
            if not hasattr(fib, "monoid_candidates"):
                raise UnsupportedBackend(f"backend over {b} cannot enumerate monoids")
            for x in self._monoid_carriers(b, fib):
                cands = fib.monoid_candidates(x)
                if not cands:
                    continue
                auts = fib.automorphisms(x) if len(cands) > 1 else [fib.identity(x)]
                for mu, eta in cands:
                    key = (b, x, mu, eta)
                    if key in self._monoid_index:
                        continue
                    orbit = {}
                    for a in auts:
                        ai = fib.inverse(a)
                        mu2 = fib.compose(fib.compose(a, mu), fib.tensor_mor(ai, ai))
                        eta2 = fib.compose(a, eta)
                        orbit.setdefault((mu2, eta2), a)
                    best = min(orbit, key=lambda k: (fib.mor_id(k[0]), fib.mor_id(k[1])))
                    R = (b, x)
                    mu_t, eta_t = M.embed(b, best[0]), M.embed(b, best[1])
                    rep_obj = MonoidObject(R, mu_t, eta_t, is_commutative(M, R, mu_t), monoid_id(M, R, mu_t, eta_t))
                    vr = validate_monoid(M, rep_obj)
                    if not vr.ok:
                        self.report.extend(vr, "monoid")
                        continue
                    a_best = orbit[best]
                    for (mu2, eta2), a in orbit.items():
                        # iso from (x, mu2, eta2) to the representative
                        iso = fib.compose(a_best, fib.inverse(a))
                        self._monoid_index[(b, x, mu2, eta2)] = (rep_obj, iso)
                    out.append(rep_obj)
        return sorted(out, key=lambda r: r.id)

    def _enumerate_modules(self, monoids: list[MonoidObject]) -> list[ModuleObject]:
        M = self.M
        out = []
        for R in monoids:
            b = M.P.obj(R.R)
            fib = M.backend(b)
            mu, eta = M.unembed(R.mu), M.unembed(R.eta)
            r = R.R[1]
            for x in self._module_carriers(fib):
                try:
                    acts = fib.action_candidates(x, mu, eta)
                except TruncationError as e:
                    self.report.truncated("module.enumeration", str(e), R.id, fib.obj_id(x))
                    continue
                if not acts:
                    continue
                auts = None
                for k in acts:
                    if (R.id, x, k) in self._module_index:
                        continue
                    if len(acts) == 1:
                        orbit = {k: fib.identity(x)}
                    else:
                        if auts is None:
                            auts = fib.automorphisms(x)
                        orbit = {}
                        ir = fib.identity(r)
                        for a in auts:
                            k2 = fib.compose(fib.compose(a, k), fib.tensor_mor(fib.inverse(a), ir))
                            orbit.setdefault(k2, a)
                    best = min(orbit, key=fib.mor_id)
                    X = (b, x)
                    kt = M.embed(b, best)
                    mod = ModuleObject(R, X, kt, module_id(M, R, X, kt))
                    vr = validate_module(M, mod)
                    if not vr.ok:
                        self.report.extend(vr, "module")
                        continue
                    a_best = orbit[best]
                    for k2, a in orbit.items():
                        self._module_index[(R.id, x, k2)] = (mod, fib.compose(a_best, fib.inverse(a)))
                    out.append(mod)
        return sorted(out, key=lambda m: m.id)

    # canonical forms ---------------------------------------------------------

    def canonical_monoid(self, b: str, x, mu, eta) -> tuple[MonoidObject, Any]:
        """Representative of the fibre monoid (x, mu, eta) and an iso to it."""
        try:
            return self._monoid_index[(b, x, mu, eta)]
        except KeyError:
            fib = self.M.backend(b)
            if not fib.has_object(x) or self._card(fib, x) > self.config.monoid_bound:
                raise TruncationError("monoid universe", self.config.monoid_bound, fib.obj_id(x)) from None
            raise StructuralError(f"monoid on {fib.obj_id(x)} not in the enumerated universe") from None

    def canonical_module(self, R: MonoidObject, x, kappa) -> tuple[ModuleObject, Any]:
        try:
            return self._module_index[(R.id, x, kappa)]
        except KeyError:
            b = self.M.P.obj(R.R)
            fib = self.M.backend(b)
            if not fib.has_object(x) or x not in self._module_carriers(fib):
                raise TruncationError("module universe", self.config.module_bound or "fibre bound",
                                      fib.obj_id(x)) from None
            raise StructuralError(f"action on {fib.obj_id(x)} over {R.id} not enumerated") from None

    # projections -------------------------------------------------------------

    def mon_projection(self, comm: bool = False) -> Functor:
        C = self.Comm if comm else self.Mon
        P = self.M.P
        return Functor(C, self.M.base, lambda r: P.obj(r.R), lambda m: P.mor(m.phi), f"{C.name}->B",
                       piece_image=lambda piece: piece.over)

    def mod_projection(self, comm: bool = False) -> Functor:
        C = self.Mod_c if comm else self.Mod
        B = self.Comm if comm else self.Mon
        return Functor(C, B, lambda x: x.R, lambda m: m.phi, f"{C.name}->{B.name}", additive=True,
                       piece_image=lambda piece: piece.over)

    def mod_to_base(self) -> Functor:
        P = self.M.P
        return Functor(self.Mod, self.M.base, lambda x: P.obj(x.M), lambda m: P.mor(m.alpha), "Mod->B",
                       additive=True, piece_image=lambda piece: P.mor(piece.over.phi))

    # hom pieces of Mod ---------------------------------------------------------

    def equivariant_piece(self, x: ModuleObject, y: ModuleObject, phi: MonHom) -> HomPiece:
        """All alpha with (phi, alpha): x -> y a module morphism, as a piece over phi."""
        M = self.M
        E = M.total
        f = M.P.mor(phi.phi)
        wrap = lambda a: ModHom(x, y, phi, a)  # noqa: E731
        pieces = _total_pieces(M, x.M, y.M, f)
        out_lin = []
        elems = []
        for piece in pieces:
            fn1 = lambda a: E.compose(y.kappa, M.tensor_mor(a, phi.phi))  # noqa: E731
            fn2 = lambda a: E.compose(a, x.kappa)  # noqa: E731
            if piece.linear:
                tgt = [p for p in _total_pieces(M, M.tensor_obj(x.M, x.R.R), y.M, f, bounded=False)]
                if len(tgt) == 1 and tgt[0].linear:
                    sub = linear_equalizer(piece, tgt[0], fn1, fn2, over=phi)
                    out_lin.append(mapped_piece(sub, wrap, lambda m: m.alpha, phi))
                    continue
            fast = self._fast_equivariant(x, y, phi, f)
            if fast is not None:
                elems.extend(wrap(a) for a in fast)
                continue
            elems.extend(wrap(a) for a in piece.elements(self.budget) if E.same_morphism(fn1(a), fn2(a)))
        if out_lin and not elems and len(out_lin) == 1:
            return out_lin[0]
        for p in out_lin:
            elems.extend(p.elements(self.budget))
        return ListPiece(elems, over=phi)

    def _fast_equivariant(self, x, y, phi, f):
        M = self.M
        if not M.base.is_identity(f) or not isinstance(phi.phi, GMor):
            return None
        b = M.P.obj(x.M)
        fib = M.backends.get(b)
        if fib is None or not hasattr(fib, "equivariant_maps"):
            return None
        alphas = fib.equivariant_maps(x.M[1], M.unembed(x.kappa), y.M[1], M.unembed(y.kappa), M.unembed(phi.phi))
        return [M.embed(b, a) for a in alphas]

    # transport along base morphisms -------------------------------------------

    def _transport_monoid(self, f: str, R: MonoidObject):
        """(R', mu', eta') over the target of f and the lift R -> R'."""
        M = self.M
        E = M.total
        lR = M.lift(f, R.R)
        R2 = E.target(lR)
        if E.is_identity(lR):
            return R2, R.mu, R.eta, lR
        b = M.base.target(f)
        idb = M.base.identity(b)
        mu2 = unique_filler(M.P, M.tensor_mor(lR, lR), E.compose(lR, R.mu), idb, self.budget)
        eta2 = unique_filler(M.P, M.unit_mor(f), E.compose(lR, R.eta), idb, self.budget)
        return R2, mu2, eta2, lR

    def monoid_lift(self, f: str, R: MonoidObject) -> MonHom:
        """Opcartesian lift of f at R in Mon -> B (transport then canonical form)."""
        M = self.M
        b = M.base.target(f)
        R2, mu2, eta2, lR = self._transport_monoid(f, R)
        rep, iso = self.canonical_monoid(b, R2[1], M.unembed(mu2), M.unembed(eta2))
        return MonHom(R, rep, M.total.compose(M.embed(b, iso), lR))

    # extension and restriction of scalars --------------------------------------

    def extension(self, phi: MonHom, x: ModuleObject) -> ExtensionResult:
        key = (self.Mon.mor_id(phi), x.id)
        if key not in self._ext_cache:
            self._ext_cache[key] = self._extension(phi, x)
        return self._ext_cache[key]

    def _extension(self, phi: MonHom, x: ModuleObject) -> ExtensionResult:
        M = self.M
        E = M.total
        R, S = phi.src, phi.tgt
        if x.R != R:
            raise StructuralError("module is not over the source of the monoid morphism")
        f = M.P.mor(phi.phi)
        b = M.base.target(f)
        idb = M.base.identity(b)
        fib = M.backend(b)
        if not hasattr(fib, "coequalizer"):
            raise UnsupportedBackend(f"backend over {b} has no coequalizers")
        # transport carrier, action and monoid along f
        lX = M.lift(f, x.M)
        X2 = E.target(lX)
        R2, mu2, eta2, lR = self._transport_monoid(f, R)
        if E.is_identity(lX) and E.is_identity(lR):
            k2 = x.kappa
            phibar = phi.phi
        else:
            k2 = unique_filler(M.P, M.tensor_mor(lX, lR), E.compose(lX, x.kappa), idb, self.budget)
            phibar = unique_filler(M.P, lR, phi.phi, idb, self.budget)
        S0 = S.R
        iX, iS = E.identity(X2), E.identity(S0)
        nu = S.mu
        # reflexive pair (X' (x) R') (x) S => X' (x) S
        d0 = M.tensor_mor(k2, iS)
        d1 = E.compose(M.tensor_mor(iX, E.compose(nu, M.tensor_mor(phibar, iS))), M.assoc(X2, R2, S0))
        q = fib.coequalizer(M.unembed(d0), M.unembed(d1))
        Q = fib.target(q)
        qt = M.embed(b, q)
        # induced action: sigma . (q (x) 1) = q . (1 (x) nu) . assoc
        g = E.compose(qt, E.compose(M.tensor_mor(iX, nu), M.assoc(X2, S0, S0)))
        e = M.tensor_mor(qt, iS)
        sigma = fib.factor(M.unembed(e), M.unembed(g))
        if sigma is None:
            raise StructuralError("induced action does not factor through the coequalizer")
        # unit X -> X' -> X' (x) I -> X' (x) S -> Q
        rinv = E.inverse(M.runit(X2), self.budget)
        if rinv is None:
            raise StructuralError(f"right unitor at {E.obj_id(X2)} is not invertible")
        u_fib = E.compose(qt, E.compose(M.tensor_mor(iX, S.eta), rinv))
        rep, iso = self.canonical_module(S, Q, sigma)
        unit_alpha = E.compose(M.embed(b, iso), E.compose(u_fib, lX))
        return ExtensionResult(rep, ModHom(x, rep, phi, unit_alpha), Q, sigma, q)

    def direct_sum(self, x: ModuleObject, y: ModuleObject) -> tuple[ModuleObject, ModHom, ModHom]:
        """Canonical x + y over a common monoid, with both injections."""
        M = self.M
        E = M.total
        if x.R != y.R:
            raise StructuralError("direct sum needs modules over the same monoid")
        R = x.R
        b = M.P.obj(R.R)
        fib = M.backend(b)
        if not hasattr(fib, "sum_action"):
            raise UnsupportedBackend(f"backend over {b} has no direct sums")
        kx, ky = M.unembed(x.kappa), M.unembed(y.kappa)
        s = fib.direct_sum(x.M[1], y.M[1])
        k = fib.sum_action(kx, ky, R.R[1])
        rep, iso = self.canonical_module(R, s, k)
        i1, i2 = fib.injections(x.M[1], y.M[1])
        idR = self.Mon.identity(R)
        j1 = ModHom(x, rep, idR, E.compose(M.embed(b, iso), M.embed(b, i1)))
        j2 = ModHom(y, rep, idR, E.compose(M.embed(b, iso), M.embed(b, i2)))
        return rep, j1, j2

    def extension_lift(self, phi: MonHom, x: ModuleObject) -> ModHom:
        return self.extension(phi, x).unit

    def restriction(self, phi: MonHom, y: ModuleObject) -> ModuleObject:
        """Restriction of scalars along a fibre monoid morphism phi: R -> S."""
        M = self.M
        E = M.total
        if not M.base.is_identity(M.P.mor(phi.phi)):
            raise StructuralError("restriction of scalars needs a morphism inside one fibre")
        if y.R != phi.tgt:
            raise StructuralError("module is not over the target of the monoid morphism")
        kappa = E.compose(y.kappa, M.tensor_mor(E.identity(y.M), phi.phi))
        return ModuleObject(phi.src, y.M, kappa, module_id(M, phi.src, y.M, kappa))


def build_Mon(alg: FibredAlgebra) -> tuple[MonCategory, Functor]:
    """Mon(P) with its projection to the base."""
    return alg.Mon, alg.mon_projection()


def build_Comm(alg: FibredAlgebra) -> tuple[MonCategory, Functor]:
    return alg.Comm, alg.mon_projection(comm=True)


def build_Mod(alg: FibredAlgebra) -> tuple[ModCategory, Functor]:
    """Mod(P) with its projection (R, M) |-> R to Mon(P)."""
    return alg.Mod, alg.mod_projection()


def build_Mod_c(alg: FibredAlgebra) -> tuple[ModCategory, Functor]:
    return alg.Mod_c, alg.mod_projection(comm=True)


def extension_of_scalars(alg: FibredAlgebra, phi: MonHom, x: ModuleObject) -> ExtensionResult:
    """x (x)_R S for phi: R -> S, with its opcartesian unit over phi."""
    return alg.extension(phi, x)


def restriction_of_scalars(alg: FibredAlgebra, phi: MonHom, y: ModuleObject) -> ModuleObject:
    return alg.restriction(phi, y)


# ---------------------------------------------------------------------------
# Reflexive coequalizers


@dataclass
class Coequalizer:
    obj: Any
    q: Any
    certificate: str | None  # None when the universal property was certified


def reflexive_coequalizer(fib, d0, d1, s=None, budget: int = DEFAULT_BUDGET) -> Coequalizer:
    """Coequalizer of a reflexive pair in a fibre backend, with certificate."""
    if not hasattr(fib, "coequalizer") or fib.coequalizer is None:
        raise UnsupportedBackend(f"{fib.name}: no coequalizers for this backend")
    if s is not None:
        y = fib.target(d0)
        if fib.compose(d0, s) != fib.identity(y) or fib.compose(d1, s) != fib.identity(y):
            raise StructuralError("pair is not reflexive for the given section")
    q = fib.coequalizer(d0, d1)
    cert = fib.certify_coequalizer(d0, d1, q, budget)
    return Coequalizer(fib.target(q), q, cert)


# ---------------------------------------------------------------------------
# Modules over monoids: coequalizer hypotheses and the opfibration conclusion


def verify_modovermon(M: MonoidalOpfibration, alg: FibredAlgebra | None = None,
                      config: AlgebraConfig | None = None, budget: int = DEFAULT_BUDGET) -> ValidationReport:
    """Check that Mod -> Mon is an opfibration, with its hypotheses.

    Check ids: (a) fibres have reflexive coequalizers, (b) direct images
    preserve them, (c) tensoring with a fixed object preserves them, and
    (d) Mod -> Mon and Mon -> B are opfibrations with the chosen lifts.
    """
    rep = ValidationReport(f"{M.name}: verify_modovermon")
    pairs: dict[str, list] = {}
    # (a) fibres have reflexive coequalizers
    for b in M.base.objects():
        fib = M.backend(b)
        pairs[b] = []
        if not hasattr(fib, "reflexive_pairs"):
            rep.structural("a.coequalizers", "backend cannot enumerate reflexive pairs", b)
            continue
        for d0, d1, s in fib.reflexive_pairs():
            try:
                c = reflexive_coequalizer(fib, d0, d1, s, budget)
            except UnsupportedBackend as e:
                rep.law("a.coequalizers", f"coequalizer not computable: {e}", b,
                        fib.mor_id(d0), fib.mor_id(d1))
                break
            except TruncationError as e:
                rep.truncated("a.coequalizers", str(e), b, fib.mor_id(d0), fib.mor_id(d1))
                continue
            rep.checked += 1
            if not fib.has_object(c.obj):
                rep.law("a.coequalizers", "coequalizer leaves the universe", b, fib.mor_id(d0), fib.mor_id(d1))
            elif c.certificate is not None:
                rep.law("a.coequalizers", c.certificate, b, fib.mor_id(d0), fib.mor_id(d1))
            else:
                pairs[b].append((d0, d1, c.q))
        rep.note(f"(a) {b}: {len(pairs[b])} reflexive pairs certified")
    # (b) direct images preserve them
    for f in M.base.morphism_ids():
        a, b = M.base.source(f), M.base.target(f)
        fa, fb = M.backend(a), M.backend(b)
        F = M.indexed.transition(f) if M.indexed is not None and M.indexed.strict else None
        if F is None:
            rep.truncated("b.direct_image", "direct image needs strict indexed data", f)
            continue
        for d0, d1, q in pairs[a]:
            rep.checked += 1
            e0, e1, eq = F.mor(d0), F.mor(d1), F.mor(q)
            try:
                cert = fb.certify_coequalizer(e0, e1, eq, budget)
            except TruncationError as e:
                rep.truncated("b.direct_image", str(e), f, fa.mor_id(d0))
                continue
            if cert is not None:
                rep.law("b.direct_image", f"{f}_* does not preserve the coequalizer: {cert}", f,
                        fa.mor_id(d0), fa.mor_id(d1))
    # (c) - (x) E preserves them, per fibre
    for b in M.base.objects():
        fib = M.backend(b)
        for d0, d1, q in pairs[b]:
            Y = fib.target(d0)
            for e in fib.objects():
                if not fib.has_object(fib.tensor_obj(Y, e)):
                    continue
                ie = fib.identity(e)
                rep.checked += 1
                try:
                    cert = fib.certify_coequalizer(fib.tensor_mor(d0, ie), fib.tensor_mor(d1, ie),
                                                   fib.tensor_mor(q, ie), budget)
                except TruncationError as ex:
                    rep.truncated("c.tensor", str(ex), b, fib.obj_id(e))
                    continue
                if cert is not None:
                    rep.law("c.tensor", f"- (x) {fib.obj_id(e)} does not preserve the coequalizer: {cert}",
                            b, fib.mor_id(d0), fib.mor_id(d1))
    # (d) the two opfibrations
    if alg is None:
        alg = FibredAlgebra(M, config)
    rep.extend(alg.report, "build")
    PM = alg.mon_projection()
    rep.extend(verify_opfibration(PM, alg.monoid_lift, budget, f"Mon({M.name})->B"), "d.mon")
    PX = alg.mod_projection()

    def ext_lift(phi, x):
        return alg.extension_lift(phi, x)

    rep.extend(verify_opfibration(PX, ext_lift, budget, f"Mod({M.name})->Mon"), "d.mod")
    return rep


# ---------------------------------------------------------------------------
# Fibre restriction, adjunction, pseudofunctoriality


def fibre_restriction_check(M: MonoidalOpfibration, alg: FibredAlgebra, b: str,
                            mutate=None, compose_limit: int | None = 20000) -> ValidationReport:
    """Mod -> Mon restricted to the fibre over b equals the intrinsic build on E_b."""
    rep = ValidationReport(f"{M.name}: fibre restriction at {b}")
    PM = alg.mon_projection()
    PX = alg.mod_to_base()
    mon_b = FibreCategory(PM, b, name=f"Mon_{b}")
    mod_b = FibreCategory(PX, b, name=f"Mod_{b}")
    Mb = M.restrict_to(b)
    intrinsic = FibredAlgebra(Mb, alg.config)
    imon, imod = intrinsic.Mon, intrinsic.Mod
    if mutate is not None:
        imod = mutate(imod)
    rep.extend(compare_categories(mon_b, imon, alg.budget), "Mon")
    rep.extend(compare_categories(mod_b, imod, alg.budget, compose_limit), "Mod")
    # the projections agree: (R, M) |-> R on objects, (phi, alpha) |-> phi on morphisms
    for x in imod.objects():
        rep.checked += 1
        if x.R.id not in {r.id for r in mon_b.objects()}:
            rep.law("projection", "projection leaves the Mon fibre", x.id)
    return rep


@dataclass
class AdjunctionCount:
    lhs: int  # |Hom_S(ext M, N)|
    rhs: int  # |Hom_R(M, res N)|
    bijective: bool
    phi: str
    module: str
    target: str


def adjunction_count(alg: FibredAlgebra, phi: MonHom, x: ModuleObject, y: ModuleObject) -> AdjunctionCount:
    """Compare |Hom_S(phi_! x, y)| with |Hom_R(x, phi^* y)| and test theta |-> theta . unit."""
    M = alg.M
    E = M.total
    ext = extension_of_scalars(alg, phi, x)
    res = restriction_of_scalars(alg, phi, y)
    S = phi.tgt
    idS = alg.Mon.identity(S)
    idR = alg.Mon.identity(phi.src)
    left = alg.equivariant_piece(ext.module, y, idS)
    right = alg.equivariant_piece(x, res, idR)
    u = ext.unit.alpha
    fn = lambda th: ModHom(x, res, idR, E.compose(th.alpha, u))  # noqa: E731
    if left.linear and right.linear:
        _, ker = linear_map_rank(left, right, fn)
        bij = left.size == right.size and not any(ker.values())
    else:
        imgs = {E.mor_key(fn(th).alpha) for th in left.elements(alg.budget)}
        targets = {E.mor_key(a.alpha) for a in right.elements(alg.budget)}
        bij = len(imgs) == left.size and imgs == targets
    return AdjunctionCount(left.size, right.size, bij, alg.Mon.mor_id(phi), x.id, y.id)


def fibre_monoid_morphisms(alg: FibredAlgebra) -> list[MonHom]:
    """Monoid morphisms lying in a single fibre, in id order."""
    out = []
    for R in alg.Mon.objects():
        for S in alg.Mon.objects():
            if alg.M.P.obj(R.R) != alg.M.P.obj(S.R):
                continue
            for phi in alg.Mon.hom(R, S):
                if alg.M.base.is_identity(alg.M.P.mor(phi.phi)):
                    out.append(phi)
    return sorted(out, key=alg.Mon.mor_id)


def adjunction_triples(alg: FibredAlgebra, sample: int | None = None, seed: int = 0) -> list[tuple]:
    """(phi, M, N) with phi a fibre monoid morphism, M over its source, N over its target."""
    by_monoid: dict[str, list] = {}
    for x in alg.Mod.objects():
        by_monoid.setdefault(x.R.id, []).append(x)
    triples = [(phi, x, y) for phi in fibre_monoid_morphisms(alg)
               for x in by_monoid.get(phi.src.id, []) for y in by_monoid.get(phi.tgt.id, [])]
    if sample is not None and sample < len(triples):
        rng = random.Random(seed)
        triples = sorted(rng.sample(triples, sample), key=lambda t: (alg.Mon.mor_id(t[0]), t[1].id, t[2].id))
    return triples


def _adjunction_into(rep: ValidationReport, alg: FibredAlgebra, triples: list) -> None:
    for phi, x, y in triples:
        try:
            c = adjunction_count(alg, phi, x, y)
        except TruncationError as e:
            rep.truncated("adjunction", str(e), alg.Mon.mor_id(phi), x.id)
            continue
        rep.checked += 1
        if c.lhs != c.rhs:
            rep.law("adjunction.count", f"|Hom_S| = {c.lhs} but |Hom_R| = {c.rhs}", c.phi, c.module, c.target)
        elif not c.bijective:
            rep.law("adjunction.bijection", "theta |-> theta . unit is not bijective", c.phi, c.module, c.target)


_WORKER_STATE: tuple | None = None


def _adjunction_chunk(bounds: tuple[int, int]) -> ValidationReport:
    alg, triples = _WORKER_STATE
    rep = ValidationReport("chunk")
    _adjunction_into(rep, alg, triples[bounds[0]:bounds[1]])
    return rep


def verify_adjunction(alg: FibredAlgebra, sample: int | None = None, seed: int = 0,
                      workers: int = 1) -> ValidationReport:
    """Hom counts and the unit bijection over all (or sampled) triples.

    With ``workers > 1`` the triples are split into contiguous chunks checked
    in forked processes; chunk reports are merged in order.
    """
    global _WORKER_STATE
    rep = ValidationReport(f"{alg.M.name}: extension/restriction adjunction")
    triples = adjunction_triples(alg, sample, seed)
    if workers <= 1 or len(triples) < 2 * workers:
        _adjunction_into(rep, alg, triples)
        return rep
    import multiprocessing

    step = -(-len(triples) // workers)
    chunks = [(i, min(i + step, len(triples))) for i in range(0, len(triples), step)]
    _WORKER_STATE = (alg, triples)
    try:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            parts = pool.map(_adjunction_chunk, chunks)
    finally:
        _WORKER_STATE = None
    for part in parts:
        rep.extend(part)
    return rep


def pseudofunctoriality(alg: FibredAlgebra, phi: MonHom, psi: MonHom, x: ModuleObject) -> ValidationReport:
    """ext along psi.phi is uniquely isomorphic to ext along psi of ext along phi."""
    rep = ValidationReport("pseudofunctoriality")
    Mod = alg.Mod
    P = alg.mod_projection()
    e1 = alg.extension(alg.Mon.compose(psi, phi), x)
    a = alg.extension(phi, x)
    e2 = alg.extension(psi, a.module)
    g = Mod.compose(e2.unit, a.unit)
    idT = alg.Mon.identity(psi.tgt)
    fs = fillers(P, e1.unit, g, idT, alg.budget)
    rep.checked += 1
    if len(fs) != 1:
        rep.law("pseudo.unique", f"{len(fs)} connecting morphisms", x.id)
    elif Mod.inverse(fs[0], alg.budget) is None:
        rep.law("pseudo.iso", "connecting morphism is not an isomorphism", x.id)
    return rep


def verify_pseudofunctoriality(alg: FibredAlgebra, limit: int | None = None) -> ValidationReport:
    """Connecting isos for every composable pair of monoid morphisms and module.

    With ``limit`` only the first that many (phi, psi, module) triples in id
    order are checked.
    """
    rep = ValidationReport(f"{alg.M.name}: pseudofunctoriality of extension")
    Mon = alg.Mon
    homs: dict[str, list[MonHom]] = {}
    for R in Mon.objects():
        for S in Mon.objects():
            homs.setdefault(R.id, []).extend(Mon.hom(R, S))
    by_monoid: dict[str, list] = {}
    for x in alg.Mod.objects():
        by_monoid.setdefault(x.R.id, []).append(x)
    n = 0
    for R in Mon.objects():
        for phi in sorted(homs.get(R.id, []), key=Mon.mor_id):
            for psi in sorted(homs.get(phi.tgt.id, []), key=Mon.mor_id):
                for x in by_monoid.get(R.id, []):
                    if limit is not None and n >= limit:
                        rep.note(f"stopped after {limit} triples")
                        return rep
                    n += 1
                    try:
                        r = pseudofunctoriality(alg, phi, psi, x)
                    except TruncationError as e:
                        rep.truncated("pseudo", str(e), Mon.mor_id(phi), Mon.mor_id(psi), x.id)
                        continue
                    except StructuralError as e:
                        rep.law("pseudo.exists", str(e), Mon.mor_id(phi), Mon.mor_id(psi), x.id)
                        continue
                    rep.extend(r)
    return rep
