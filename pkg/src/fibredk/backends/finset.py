"""Finite sets {0..k-1} under cartesian product.

The product of sets of sizes m and n is {0..mn-1}, with the pair (i, j)
encoded as i*n + j.  This encoding is strictly associative and unital, so
the associator and unitors are identities; the braiding is the swap.
"""
from __future__ import annotations

import itertools
from typing import NamedTuple

from ..fincat import DEFAULT_BUDGET, FinCatPresentation, Functor, HomPiece, StructuralError, TruncationError
from ..monoidal import FibreMonoidal, IndexedMonoidal


class SMor(NamedTuple):
    src: int
    tgt: int
    fn: tuple[int, ...]


class _FunctionPiece(HomPiece):
    def __init__(self, s: int, t: int):
        self.s, self.t = s, t
        self.over = None

    @property
    def size(self) -> int:
        return self.t ** self.s

    def elements(self, budget: int = DEFAULT_BUDGET) -> list:
        if self.size > budget:
            raise TruncationError("hom-set enumeration", budget, f"{self.t}^{self.s}")
        return [SMor(self.s, self.t, fn) for fn in itertools.product(range(self.t), repeat=self.s)]


def _perms(k: int):
    return itertools.permutations(range(k))


class _SetAlgebra:
    """Monoids are tables, actions are right actions m.r."""

    def monoid_candidates(self, k: int) -> list[tuple[SMor, SMor]]:
        """Every associative unital multiplication on {0..k-1}, with its unit."""
        out = []
        for e in range(k):
            others = [i for i in range(k) if i != e]
            cells = [(i, j) for i in others for j in others]
            for vals in itertools.product(range(k), repeat=len(cells)):
                t = {}
                for i in range(k):
                    t[(e, i)] = i
                    t[(i, e)] = i
                t.update(zip(cells, vals))
                if all(t[(t[(a, b)], c)] == t[(a, t[(b, c)])] for a in others for b in others for c in others):
                    mu = SMor(k * k, k, tuple(t[(a, b)] for a in range(k) for b in range(k)))
                    out.append((mu, SMor(1, k, (e,))))
        return out


    def action_candidates(self, k: int, mu: SMor, eta: SMor) -> list[SMor]:
        """Every right action of the monoid (mu, eta) on {0..k-1}.

        An action is a family of maps f_r with f_e = id and f_{rs} = f_s . f_r,
        found by backtracking over the non-unit elements.
        """
        n = mu.tgt
        e = eta.fn[0]
        mult = lambda r, s: mu.fn[r * n + s]  # noqa: E731
        order = [r for r in range(n) if r != e]
        maps = list(itertools.product(range(k), repeat=k))
        ident = tuple(range(k))
        out = []
        f: dict[int, tuple] = {e: ident}

        def consistent() -> bool:
            for r in f:
                for s in f:
                    rs = mult(r, s)
                    if rs in f:
                        fr, fs = f[r], f[s]
                        if any(fs[fr[m]] != f[rs][m] for m in range(k)):
                            return False
            return True

        def rec(i: int):
            if i == len(order):
                out.append(SMor(k * n, k, tuple(f[r][m] for m in range(k) for r in range(n))))
                return
            r = order[i]
            for fr in maps:
                f[r] = fr
                if consistent():
                    rec(i + 1)
                del f[r]

        rec(0)
        return out


    def automorphisms(self, k: int) -> list[SMor]:
        return [SMor(k, k, p) for p in _perms(k)]


    def factor(self, e: SMor, g: SMor) -> SMor | None:
        """h with h . e = g, for e surjective; None if g is not constant on fibres."""
        h: dict[int, int] = {}
        for x, y in zip(e.fn, g.fn):
            if h.setdefault(x, y) != y:
                return None
        if len(h) != e.tgt:
            return None
        return SMor(e.tgt, g.tgt, tuple(h[i] for i in range(e.tgt)))


    def equivariant_maps(self, m: int, kappa: SMor, nn: int, sigma: SMor, phi: SMor) -> list[SMor]:
        """alpha: m -> nn with alpha(kappa(x, r)) = sigma(alpha(x), phi(r))."""
        r_size = phi.src
        s_size = phi.tgt
        out = []
        alpha: list[int | None] = [None] * m

        def propagate(x: int, val: int, assigned: list) -> bool:
            stack = [(x, val)]
            while stack:
                y, v = stack.pop()
                if alpha[y] is not None:
                    if alpha[y] != v:
                        return False
                    continue
                alpha[y] = v
                assigned.append(y)
                for r in range(r_size):
                    stack.append((kappa.fn[y * r_size + r], sigma.fn[v * s_size + phi.fn[r]]))
            return True

        def rec(x: int):
            while x < m and alpha[x] is not None:
                x += 1
            if x == m:
                out.append(SMor(m, nn, tuple(alpha)))
                return
            for v in range(nn):
                assigned: list = []
                if propagate(x, v, assigned):
                    rec(x + 1)
                for y in assigned:
                    alpha[y] = None

        rec(0)
        return out


    def reflexive_pairs(self):
        """Every reflexive pair (d0, d1): X -> Y in the universe, with one section each."""
        seen = set()
        for x in self.objects():
            for y in self.objects():
                for s in itertools.product(range(x), repeat=y):
                    if len(set(s)) != y:
                        continue
                    free = [i for i in range(x) if i not in s]
                    base = {si: j for j, si in enumerate(s)}
                    options = list(itertools.product(range(y), repeat=len(free)))
                    maps = []
                    for vals in options:
                        fn = dict(base)
                        fn.update(zip(free, vals))
                        maps.append(SMor(x, y, tuple(fn[i] for i in range(x))))
                    for d0 in maps:
                        for d1 in maps:
                            if (d0, d1) in seen:
                                continue
                            seen.add((d0, d1))
                            yield d0, d1, SMor(y, x, s)


    def certify_coequalizer(self, d0: SMor, d1: SMor, q: SMor, budget: int = DEFAULT_BUDGET) -> str | None:
        """None if q is a coequalizer of (d0, d1) against every object of the universe."""
        if self.compose(q, d0) != self.compose(q, d1):
            return "q does not coequalize the pair"
        y, qq = q.src, q.tgt
        for z in self.objects():
            if z ** y > budget or z ** qq > budget:
                from ..fincat import TruncationError

                raise TruncationError("coequalizer certificate", budget, f"{y}->{z}")
            counts: dict = {}
            for k in itertools.product(range(z), repeat=qq):
                key = tuple(k[i] for i in q.fn)
                counts[key] = counts.get(key, 0) + 1
            for h in itertools.product(range(z), repeat=y):
                if all(h[a] == h[b] for a, b in zip(d0.fn, d1.fn)):
                    if counts.get(h, 0) != 1:
                        return f"map {list(h)} to {z} has {counts.get(h, 0)} factorizations"
        return None


class FinSetFibre(_SetAlgebra, FibreMonoidal):
    symmetric = True

    def __init__(self, bound: int, name: str = "FinSet"):
        if bound < 0:
            raise StructuralError("universe bound must be non-negative")
        self.bound = bound
        self.name = name

    def objects(self) -> list:
        return list(range(self.bound + 1))

    def has_object(self, x) -> bool:
        return isinstance(x, int) and 0 <= x <= self.bound

    def obj_id(self, x) -> str:
        return str(x)

    def mor_id(self, m: SMor) -> str:
        return f"{m.src}->{m.tgt}:[{','.join(map(str, m.fn))}]"

    def parse_obj(self, s: str):
        try:
            x = int(s)
        except ValueError:
            raise StructuralError(f"bad finite-set object {s!r}") from None
        return x

    def parse_mor(self, s: str) -> SMor:
        try:
            head, body = s.split(":", 1)
            a, b = head.split("->")
            inner = body.strip()[1:-1]
            fn = tuple(int(v) for v in inner.split(",")) if inner else ()
            m = SMor(int(a), int(b), fn)
        except ValueError:
            raise StructuralError(f"bad finite-set morphism {s!r}") from None
        if len(m.fn) != m.src or any(not 0 <= v < m.tgt for v in m.fn):
            raise StructuralError(f"not a function: {s!r}")
        return m

    def source(self, m):
        return m.src

    def target(self, m):
        return m.tgt

    def identity(self, x):
        return SMor(x, x, tuple(range(x)))

    def compose(self, g: SMor, f: SMor) -> SMor:
        if f.tgt != g.src:
            raise StructuralError("composing non-composable functions")
        return SMor(f.src, g.tgt, tuple(g.fn[i] for i in f.fn))

    def hom_pieces(self, x, y) -> list[HomPiece]:
        return [_FunctionPiece(x, y)]

    def inverse(self, m: SMor, budget: int = DEFAULT_BUDGET):
        if m.src != m.tgt or len(set(m.fn)) != m.src:
            return None
        inv = [0] * m.src
        for i, v in enumerate(m.fn):
            inv[v] = i
        return SMor(m.tgt, m.src, tuple(inv))

    # monoidal structure --------------------------------------------------

    def tensor_obj(self, x, y):
        return x * y

    def direct_sum(self, x, y):
        return x + y

    def injections(self, x, y) -> tuple[SMor, SMor]:
        return SMor(x, x + y, tuple(range(x))), SMor(y, x + y, tuple(range(x, x + y)))

    def sum_action(self, kx: SMor, ky: SMor, r: int) -> SMor:
        """Action on the coproduct from actions of r on both summands."""
        x, y = kx.tgt, ky.tgt
        fn = [kx.fn[i * r + j] for i in range(x) for j in range(r)]
        fn += [x + ky.fn[i * r + j] for i in range(y) for j in range(r)]
        return SMor((x + y) * r, x + y, tuple(fn))

    def tensor_mor(self, f: SMor, g: SMor) -> SMor:
        n, n2 = g.src, g.tgt
        return SMor(f.src * n, f.tgt * n2,
                    tuple(f.fn[i] * n2 + g.fn[j] for i in range(f.src) for j in range(n)))

    def unit(self):
        return 1

    def assoc(self, x, y, z):
        return self.identity(x * y * z)

    def lunit(self, x):
        return self.identity(x)

    def runit(self, x):
        return self.identity(x)

    def braid(self, x, y):
        return SMor(x * y, x * y, tuple(j * x + i for i in range(x) for j in range(y)))

    # coequalizers --------------------------------------------------------

    def coequalizer(self, f: SMor, g: SMor) -> SMor:
        """Quotient map of the target by the equivalence generated by f ~ g."""
        parent = list(range(f.tgt))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a, b in zip(f.fn, g.fn):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = sorted({find(a) for a in range(f.tgt)})
        index = {r: i for i, r in enumerate(roots)}
        return SMor(f.tgt, len(roots), tuple(index[find(a)] for a in range(f.tgt)))

    def describe(self) -> dict:
        return {"backend": "finite-set", "bound": self.bound}


class _FinSetIndexed(IndexedMonoidal):
    def transition(self, f: str) -> Functor:
        a, b = self.base.source(f), self.base.target(f)
        return Functor(self.fibres[a], self.fibres[b], lambda x: x, lambda m: m, f"{f}_*", additive=True)


def finset_indexed(bound: int, base_obj: str = "pt", name: str = "finset") -> IndexedMonoidal:
    """Finite sets of size <= bound over the terminal base."""
    base = FinCatPresentation.terminal(base_obj, name="1")
    return _FinSetIndexed(base, {base_obj: FinSetFibre(bound)}, name)
