"""Independent oracles used by the tests.

None of these call into fibredk; they recompute the expected answer from
first principles (brute force, union-find, determinantal divisors, group
orders).
"""
from __future__ import annotations

import itertools
from functools import reduce
from math import gcd


def category_violations(objects, arrows, identities, table) -> list[tuple]:
    """Triple-loop check of a composition table; returns violation witnesses."""
    bad = []
    comp = lambda g, f: table.get((g, f))  # noqa: E731
    for f, (s, t) in arrows.items():
        if comp(identities[t], f) != f:
            bad.append(("identity.left", f))
        if comp(f, identities[s]) != f:
            bad.append(("identity.right", f))
    for f, (a, b) in arrows.items():
        for g, (b2, c) in arrows.items():
            if b2 != b:
                continue
            gf = comp(g, f)
            if gf is None or arrows.get(gf) != (a, c):
                bad.append(("compose", g, f))
                continue
            for h, (c2, _) in arrows.items():
                if c2 != c:
                    continue
                hg = comp(h, g)
                if hg is None or comp(h, gf) != comp(hg, f):
                    bad.append(("assoc", h, g, f))
    return bad


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def orbit_quotient(x: int, act, r: int, s: int, phi, mult_s) -> list[int]:
    """Class label of each (m, t) in X x S under (m.r, t) ~ (m, phi(r) t).

    ``act(m, r)`` is the right action on X, ``phi`` a list, ``mult_s(a, b)``
    the product of S.  Pairs are indexed m * s + t.
    """
    uf = UnionFind(x * s)
    for m in range(x):
        for rr in range(r):
            for t in range(s):
                uf.union(act(m, rr) * s + t, m * s + mult_s(phi[rr], t))
    return [uf.find(i) for i in range(x * s)]


def extension_agreement(pairs, unembed, extend, bound: int, truncation=Exception) -> tuple[int, int, list]:
    """Compare finite-set scalar extension with ``orbit_quotient`` pair by pair.

    ``pairs`` holds (phi, x); ``extend(phi, x)`` returns an object with
    ``carrier``, ``action``, ``quotient`` and ``module``.  Returns the number
    of in-universe pairs seen by the engine, the number the oracle expects,
    and a list of mismatching pairs.
    """
    inside = expected = 0
    bad = []
    for phi, x in pairs:
        n, r, s = x.M[1], phi.src.R[1], phi.tgt.R[1]
        kappa = unembed(x.kappa).fn
        nu = unembed(phi.tgt.mu).fn
        labels = orbit_quotient(n, lambda m, rr: kappa[m * r + rr], r, s, unembed(phi.phi).fn,
                                lambda a, b: nu[a * s + b])
        classes = len(set(labels))
        expected += classes <= bound
        try:
            ext = extend(phi, x)
        except truncation:
            if classes <= bound:
                bad.append((phi, x, "truncated inside the universe"))
            continue
        inside += 1
        q, sigma = ext.quotient.fn, ext.action.fn
        if not classes == ext.carrier == ext.module.M[1]:
            bad.append((phi, x, "class count"))
        elif any((labels[i] == labels[j]) != (q[i] == q[j]) for i, j in itertools.combinations(range(n * s), 2)):
            bad.append((phi, x, "partition"))
        elif any(sigma[q[m * s + t] * s + t2] != q[m * s + nu[t * s + t2]]
                 for m in range(n) for t in range(s) for t2 in range(s)):
            bad.append((phi, x, "action"))
    return inside, expected, bad


def determinantal_invariants(A: list[list[int]]) -> list[int]:
    """Invariant factors d_k = D_k / D_(k-1), D_k the gcd of the k x k minors."""
    rows, cols = len(A), len(A[0]) if A else 0

    def det(m):
        if len(m) == 1:
            return m[0][0]
        return sum((-1) ** j * m[0][j] * det([row[:j] + row[j + 1:] for row in m[1:]]) for j in range(len(m)))

    out, prev = [], 1
    for k in range(1, min(rows, cols) + 1):
        minors = [det([[A[i][j] for j in cs] for i in rs])
                  for rs in itertools.combinations(range(rows), k) for cs in itertools.combinations(range(cols), k)]
        D = reduce(gcd, (abs(v) for v in minors), 0)
        if D == 0:
            out.extend([0] * (min(rows, cols) - k + 1))
            break
        out.append(D // prev)
        prev = D
    return out


def gl_order(n: int, q: int) -> int:
    out = 1
    for i in range(n):
        out *= q ** n - q ** i
    return out


def z6_invariant_factors(a: int, b: int) -> list[int]:
    """Invariant factors of (Z/2)^a + (Z/3)^b, via CRT pairing."""
    k = min(a, b)
    return [6] * k + [2] * (a - k) + [3] * (b - k)


# monoids of order n up to isomorphism (all / commutative), OEIS A058129, A058131
MONOID_COUNTS = {1: (1, 1), 2: (2, 2), 3: (7, 5), 4: (35, 19)}
