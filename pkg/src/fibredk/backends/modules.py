"""Finite modules over squarefree Z/n.

For squarefree n the ring Z/n is a product of prime fields, so a finite
Z/n-module is a tuple of F_p-vector spaces, one per prime p | n, and is
determined up to isomorphism by its dimension vector.  Objects are these
dimension vectors (skeletal); morphisms are tuples of matrices.  Tensor over
Z/n is the Kronecker product prime by prime, with identity associators and
unitors; the braiding is the commutation matrix.

Base objects are rings Z/n; an arrow Z/n -> Z/m (m | n) acts on modules by
-(x)_{Z/n} Z/m, which keeps the components at primes dividing m.
"""
from __future__ import annotations

import itertools
from math import prod
from typing import NamedTuple

from .. import linalg
from ..fincat import (
    DEFAULT_BUDGET,
    FinCatPresentation,
    Functor,
    HomPiece,
    LinearPiece,
    StructuralError,
    affine_solutions,
    product_piece,
)
from ..linalg import Mat
from ..monoidal import FibreMonoidal, IndexedMonoidal


def prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            n //= p
            if n % p == 0:
                raise StructuralError("ring order must be squarefree")
        p += 1
    if n > 1:
        out.append(n)
    return out


class MMor(NamedTuple):
    src: tuple[int, ...]
    tgt: tuple[int, ...]
    mats: tuple[Mat, ...]  # mats[i]: tgt[i] x src[i] over F_{primes[i]}


class _LinearAlgebra:
    """Monoid, action and coequalizer computations by linear algebra."""

    def monoid_candidates(self, x, budget: int = DEFAULT_BUDGET) -> list:
        xx = self.tensor_obj(x, x)
        S = self.hom_piece(xx, x)
        T = product_piece(self.hom_piece(x, x), self.hom_piece(x, x))
        I = self.unit()
        ix = self.identity(x)
        target = (self.lunit(x), self.runit(x))
        out = []
        for eta in self.hom_piece(I, x).elements(budget):
            fn = lambda mu, eta=eta: (self.compose(mu, self.tensor_mor(eta, ix)),  # noqa: E731
                                      self.compose(mu, self.tensor_mor(ix, eta)))
            for mu in affine_solutions(S, T, fn, target, budget):
                lhs = self.compose(mu, self.tensor_mor(mu, ix))
                rhs = self.compose(self.compose(mu, self.tensor_mor(ix, mu)), self.assoc(x, x, x))
                if lhs == rhs:
                    out.append((mu, eta))
        return out

    def action_candidates(self, x, mu, eta, budget: int = DEFAULT_BUDGET) -> list:
        r = mu.tgt
        S = self.hom_piece(self.tensor_obj(x, r), x)
        T = self.hom_piece(x, x)
        ix, ir = self.identity(x), self.identity(r)
        fn = lambda k: self.compose(k, self.tensor_mor(ix, eta))  # noqa: E731
        out = []
        for k in affine_solutions(S, T, fn, self.runit(x), budget):
            lhs = self.compose(k, self.tensor_mor(k, ir))
            rhs = self.compose(self.compose(k, self.tensor_mor(ix, mu)), self.assoc(x, r, r))
            if lhs == rhs:
                out.append(k)
        return out

    def automorphisms(self, x, budget: int = DEFAULT_BUDGET) -> list:
        return [m for m in self.hom_piece(x, x).elements(budget) if self.inverse(m) is not None]

    def factor(self, e, g):
        """h with h . e = g, or None (e is expected to be surjective)."""
        mats = []
        for a, b, p in zip(e.mats, g.mats, self.primes):
            rows = []
            for grow in b.rows():
                sol = linalg.solve(a.rows(), grow, p) if a.nrows else (() if not any(grow) else None)
                if sol is None:
                    return None
                rows.append(list(sol))
            mats.append(Mat.from_rows(rows, a.nrows) if rows else Mat.zero(0, a.nrows))
        return MMor(e.tgt, g.tgt, tuple(mats))

    def reflexive_pairs(self):
        """Representatives (h, 0) of every parallel pair up to the additive reduction.

        The coequalizer of (d0, d1) is the cokernel of d0 - d1 and any map h
        arises as such a difference, so it suffices to treat one h per orbit
        of Aut(X) x Aut(Y), i.e. per rank vector.
        """
        for x in self.objects():
            for y in self.objects():
                ranges = [range(min(a, b) + 1) for a, b in zip(x, y)]
                for ranks in itertools.product(*ranges):
                    mats = tuple(Mat(b, a, tuple(1 if (i == j and i < r) else 0 for i in range(b) for j in range(a)))
                                 for a, b, r in zip(x, y, ranks))
                    yield MMor(x, y, mats), self.zero(x, y), None

    def certify_coequalizer(self, d0, d1, q, budget: int = DEFAULT_BUDGET) -> str | None:
        """q coequalizes, is surjective and its kernel has the dimension of im(d0 - d1)."""
        if self.compose(q, d0) != self.compose(q, d1):
            return "q does not coequalize the pair"
        h = self.sub(d0, d1)
        for a, c, p in zip(q.mats, h.mats, self.primes):
            if linalg.rank(a.rows(), a.ncols, p) != a.nrows:
                return f"q is not surjective at p={p}"
            if a.ncols - a.nrows != linalg.rank(c.rows(), c.ncols, p):
                return f"kernel of q differs from the image of d0 - d1 at p={p}"
        return None


class ModuleFibre(_LinearAlgebra, FibreMonoidal):
    """Z/n-modules of cardinality <= bound, up to isomorphism."""

    symmetric = True

    def __init__(self, n: int, bound: int, name: str | None = None):
        if n < 1:
            raise StructuralError("ring order must be positive")
        if bound < 1:
            raise StructuralError("universe bound must be positive")
        self.n = n
        self.primes = prime_factors(n)
        self.bound = bound
        self.name = name or f"Mod(Z/{n})"
        self._objs = sorted(
            (d for d in itertools.product(*[range(self._maxdim(p) + 1) for p in self.primes])
             if self.card(d) <= bound),
            key=lambda d: (self.card(d), d))

    def _maxdim(self, p: int) -> int:
        k = 0
        while p ** (k + 1) <= self.bound:
            k += 1
        return k

    def card(self, d) -> int:
        return prod(p ** k for p, k in zip(self.primes, d))

    # category --------------------------------------------------------------

    def objects(self) -> list:
        return list(self._objs)

    def has_object(self, x) -> bool:
        return (isinstance(x, tuple) and len(x) == len(self.primes)
                and all(isinstance(k, int) and k >= 0 for k in x) and self.card(x) <= self.bound)

    def obj_id(self, x) -> str:
        return "[" + ",".join(map(str, x)) + "]"

    def mor_id(self, m: MMor) -> str:
        body = ";".join(a.text() for a in m.mats)
        return f"{self.obj_id(m.src)}->{self.obj_id(m.tgt)}:{body}"

    def parse_obj(self, s: str):
        s = s.strip()
        if not (s.startswith("[") and s.endswith("]")):
            raise StructuralError(f"bad module object {s!r}")
        try:
            d = tuple(int(v) for v in s[1:-1].split(",")) if s[1:-1] else ()
        except ValueError:
            raise StructuralError(f"bad module object {s!r}") from None
        if len(d) != len(self.primes):
            raise StructuralError(f"{s!r}: expected {len(self.primes)} dimensions")
        return d

    def parse_mor(self, s: str) -> MMor:
        try:
            head, body = s.split(":", 1)
            a, b = head.split("->")
        except ValueError:
            raise StructuralError(f"bad module morphism {s!r}") from None
        src, tgt = self.parse_obj(a), self.parse_obj(b)
        parts = body.split(";")
        if len(parts) != len(self.primes):
            raise StructuralError(f"{s!r}: expected {len(self.primes)} blocks")
        try:
            mats = tuple(Mat.parse(t, tgt[i], src[i], p) for i, (t, p) in enumerate(zip(parts, self.primes)))
        except ValueError as e:
            raise StructuralError(f"{s!r}: {e}") from None
        return MMor(src, tgt, mats)

    def source(self, m):
        return m.src

    def target(self, m):
        return m.tgt

    def identity(self, x):
        return MMor(x, x, tuple(Mat.identity(k) for k in x))

    def zero(self, x, y):
        return MMor(x, y, tuple(Mat.zero(b, a) for a, b in zip(x, y)))

    def compose(self, g: MMor, f: MMor) -> MMor:
        if f.tgt != g.src:
            raise StructuralError("composing non-composable module maps")
        return MMor(f.src, g.tgt, tuple(linalg.mul(b, a, p) for a, b, p in zip(f.mats, g.mats, self.primes)))

    def add(self, f: MMor, g: MMor) -> MMor:
        return MMor(f.src, f.tgt, tuple(linalg.add(a, b, p) for a, b, p in zip(f.mats, g.mats, self.primes)))

    def sub(self, f: MMor, g: MMor) -> MMor:
        return MMor(f.src, f.tgt, tuple(linalg.add(a, linalg.scale(b, p - 1, p), p)
                                        for a, b, p in zip(f.mats, g.mats, self.primes)))

    def hom_pieces(self, x, y) -> list[HomPiece]:
        return [self.hom_piece(x, y)]

    def hom_piece(self, x, y, over=None) -> LinearPiece:
        primes = self.primes
        basis = {}
        zero = self.zero(x, y)
        for i, p in enumerate(primes):
            r, c = y[i], x[i]
            gens = []
            for a in range(r):
                for b in range(c):
                    mats = list(zero.mats)
                    mats[i] = Mat.unit(r, c, a, b)
                    gens.append(MMor(x, y, tuple(mats)))
            if gens:
                basis[p] = gens

        def coords(m: MMor) -> dict:
            return {p: m.mats[i].entries for i, p in enumerate(primes) if p in basis}

        def combine(c: dict) -> MMor:
            mats = []
            for i, p in enumerate(primes):
                r, cc = y[i], x[i]
                e = c.get(p)
                mats.append(Mat(r, cc, tuple(v % p for v in e)) if e is not None and p in basis else Mat.zero(r, cc))
            return MMor(x, y, tuple(mats))

        return LinearPiece(zero, basis, coords, combine, over)

    def inverse(self, m: MMor, budget: int = DEFAULT_BUDGET):
        if m.src != m.tgt:
            return None
        out = []
        for a, p in zip(m.mats, self.primes):
            if not linalg.is_invertible(a, p):
                return None
            out.append(linalg.inverse(a, p) if a.nrows else a)
        return MMor(m.tgt, m.src, tuple(out))

    # monoidal structure ----------------------------------------------------

    def tensor_obj(self, x, y):
        if len(x) == 1:
            return (x[0] * y[0],)
        if len(x) == 2:
            return (x[0] * y[0], x[1] * y[1])
        return tuple(a * b for a, b in zip(x, y))

    def tensor_mor(self, f: MMor, g: MMor) -> MMor:
        return MMor(self.tensor_obj(f.src, g.src), self.tensor_obj(f.tgt, g.tgt),
                    tuple(linalg.kron(a, b, p) for a, b, p in zip(f.mats, g.mats, self.primes)))

    def unit(self):
        return tuple(1 for _ in self.primes)

    def assoc(self, x, y, z):
        return self.identity(self.tensor_obj(self.tensor_obj(x, y), z))

    def lunit(self, x):
        return self.identity(x)

    def runit(self, x):
        return self.identity(x)

    def braid(self, x, y):
        return MMor(self.tensor_obj(x, y), self.tensor_obj(y, x),
                    tuple(linalg.commutation(a, b) for a, b in zip(x, y)))

    # additive structure ----------------------------------------------------

    def direct_sum(self, x, y):
        return tuple(a + b for a, b in zip(x, y))

    def injections(self, x, y) -> tuple[MMor, MMor]:
        s = self.direct_sum(x, y)
        i1 = tuple(Mat.from_rows([[1 if i == j else 0 for j in range(a)] for i in range(a + b)], a)
                   for a, b in zip(x, y))
        i2 = tuple(Mat.from_rows([[1 if i == a + j else 0 for j in range(b)] for i in range(a + b)], b)
                   for a, b in zip(x, y))
        return MMor(x, s, i1), MMor(y, s, i2)

    def sum_action(self, kx: MMor, ky: MMor, r) -> MMor:
        """Action on x + y from actions of r on x and on y (block diagonal)."""
        x, y = kx.tgt, ky.tgt
        s = self.direct_sum(x, y)
        mats = []
        for a, b in zip(kx.mats, ky.mats):
            rows = [list(row) + [0] * (b.ncols) for row in a.rows()] + \
                   [[0] * a.ncols + list(row) for row in b.rows()]
            mats.append(Mat.from_rows(rows, a.ncols + b.ncols) if rows else Mat.zero(0, a.ncols + b.ncols))
        return MMor(self.tensor_obj(s, r), s, tuple(mats))

    def cokernel(self, h: MMor) -> MMor:
        """Quotient map tgt -> tgt / im(h), in reduced coordinates."""
        mats, dims = [], []
        for a, p in zip(h.mats, self.primes):
            n = a.nrows
            # complement of the image: rows of the quotient map are a basis of
            # the annihilator of im(h), i.e. the left nullspace of a
            rows_t = [tuple(a[i, j] for j in range(a.ncols)) for i in range(n)]
            left = linalg.nullspace(rows_t, a.ncols, p) if n else []
            dims.append(len(left))
            mats.append(Mat.from_rows([list(v) for v in left], n) if left else Mat.zero(0, n))
        return MMor(h.tgt, tuple(dims), tuple(mats))

    def coequalizer(self, f: MMor, g: MMor) -> MMor:
        return self.cokernel(self.sub(f, g))

    def describe(self) -> dict:
        return {"backend": "finite-module-over", "ring": self.n, "bound": self.bound}


class ModuleIndexed(IndexedMonoidal):
    """Rings Z/n (squarefree) with quotient arrows; fibres ModuleFibre."""

    def __init__(self, base: FinCatPresentation, rings: dict[str, int], bound: int, name: str = "modules"):
        fibres = {b: ModuleFibre(rings[b], bound, name=f"Mod({b})") for b in base.objects()}
        super().__init__(base, fibres, name)
        self.rings = dict(rings)
        for f in base.morphism_ids():
            a, b = base.source(f), base.target(f)
            if rings[a] % rings[b]:
                raise StructuralError(f"arrow {f}: Z/{rings[b]} is not a quotient of Z/{rings[a]}")
        self._trans = {}

    def keep(self, f: str) -> list[int]:
        a, b = self.base.source(f), self.base.target(f)
        src, tgt = self.fibres[a].primes, self.fibres[b].primes
        return [src.index(p) for p in tgt]

    def transition(self, f: str) -> Functor:
        if f not in self._trans:
            a, b = self.base.source(f), self.base.target(f)
            idx = self.keep(f)

            def obj(x, idx=idx):
                return tuple(x[i] for i in idx)

            def mor(m: MMor, idx=idx):
                return MMor(obj(m.src), obj(m.tgt), tuple(m.mats[i] for i in idx))

            self._trans[f] = Functor(self.fibres[a], self.fibres[b], obj, mor, f"{f}_*", additive=True)
        return self._trans[f]


def ring_base(rings: dict[str, int], arrows: dict[str, tuple[str, str]], name: str = "Rings") -> FinCatPresentation:
    """Thin base category on the given rings; identities are added as id_<ring>."""
    return FinCatPresentation.thin(list(rings), arrows, name)
