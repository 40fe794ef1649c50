"""Split K_0 of a finite category with a designated sum.

Generators are isomorphism classes; each pair of representatives whose sum
lies in the universe contributes the relation [X] + [Y] - [X + Y].  The
resulting abelian group is read off a Smith normal form whose unimodular
transformations are returned and re-checked by exact multiplication.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_decomp

from .fincat import (
    DEFAULT_BUDGET,
    Category,
    StructuralError,
    TruncationError,
    ValidationReport,
    are_isomorphic,
)


# ---------------------------------------------------------------------------
# Isomorphism classes


def _profile(C: Category, x, objs: list) -> tuple:
    return tuple((C.hom_size(z, x), C.hom_size(x, z)) for z in objs)


def iso_classes(C: Category, budget: int = DEFAULT_BUDGET) -> list[list]:
    """Exact partition of the objects into isomorphism classes.

    Objects with different hom-count profiles are certainly not isomorphic;
    within a profile block an isomorphism is searched for explicitly.  Each
    class is sorted by id and the classes by their least id.
    """
    objs = sorted(C.objects(), key=C.obj_id)
    blocks: dict[tuple, list] = {}
    for x in objs:
        blocks.setdefault(_profile(C, x, objs), []).append(x)
    classes: list[list] = []
    for block in blocks.values():
        reps: list[list] = []
        for x in block:
            for cls in reps:
                if are_isomorphic(C, cls[0], x, budget):
                    cls.append(x)
                    break
            else:
                reps.append([x])
        classes.extend(reps)
    return sorted(classes, key=lambda c: C.obj_id(c[0]))


# ---------------------------------------------------------------------------
# Sums


@dataclass
class SumDesignation:
    """A chosen sum X + Y (with injections) and a zero object.

    ``sum`` returns ``(object, inj1, inj2)`` and raises
    :class:`TruncationError` when the sum leaves the universe.
    """

    sum: Callable[[Any, Any], tuple[Any, Any, Any]]
    zero: Any
    name: str = "+"

    def validate(self, C: Category, budget: int = DEFAULT_BUDGET) -> ValidationReport:
        """Injections are typed, zero is a unit and the sum is commutative and
        associative, all up to isomorphism (checked where sums exist)."""
        rep = ValidationReport(f"sum designation {self.name}")
        oid = C.obj_id
        if not C.has_object(self.zero):
            rep.structural("sum.zero", "zero object is not in the category")
            return rep
        objs = sorted(C.objects(), key=oid)
        sums: dict[tuple[str, str], Any] = {}
        for x in objs:
            for y in objs:
                try:
                    s, i1, i2 = self.sum(x, y)
                except TruncationError:
                    continue
                if not C.has_object(s):
                    continue
                sums[(oid(x), oid(y))] = s
                rep.checked += 1
                if (C.source(i1), C.target(i1), C.source(i2), C.target(i2)) != (x, s, y, s):
                    rep.law("sum.injections", "injections have the wrong type", oid(x), oid(y))
        byid = {oid(x): x for x in objs}
        z = oid(self.zero)
        for x in objs:
            s = sums.get((oid(x), z))
            rep.checked += 1
            if s is None or not are_isomorphic(C, s, x, budget):
                rep.law("sum.unit", "X + 0 is not isomorphic to X", oid(x))
        for (a, b), s in sorted(sums.items()):
            t = sums.get((b, a))
            rep.checked += 1
            if t is None or not are_isomorphic(C, s, t, budget):
                rep.law("sum.commutative", "X + Y is not isomorphic to Y + X", a, b)
        for (a, b), s in sorted(sums.items()):
            for c in byid:
                left = sums.get((oid(s), c))
                bc = sums.get((b, c))
                right = sums.get((a, oid(bc))) if bc is not None else None
                if left is None or right is None:
                    continue
                rep.checked += 1
                if not are_isomorphic(C, left, right, budget):
                    rep.law("sum.associative", "(X + Y) + Z is not isomorphic to X + (Y + Z)", a, b, c)
        return rep


def fibre_sum_designation(M, b: str) -> SumDesignation:
    """Backend direct sums in the fibre over b (objects are total objects)."""
    fib = M.backend(b)
    if not hasattr(fib, "injections"):
        raise StructuralError(f"backend over {b} has no direct sums")

    def total_sum(X, Y):
        s = fib.direct_sum(X[1], Y[1])
        if not fib.has_object(s):
            raise TruncationError("sum universe", getattr(fib, "bound", "?"), fib.obj_id(s))
        i1, i2 = fib.injections(X[1], Y[1])
        return (b, s), M.embed(b, i1), M.embed(b, i2)

    return SumDesignation(total_sum, (b, _zero(fib)), f"+ over {b}")


def _zero(fib):
    # empty set for set-like backends, the zero module for linear ones
    objs = [x for x in fib.objects() if fib.card(x) == 1] if hasattr(fib, "card") else [0]
    if not objs:
        raise StructuralError("fibre has no zero object")
    return objs[0]


# ---------------------------------------------------------------------------
# Smith normal form


@dataclass
class SmithForm:
    D: list[list[int]]
    U: list[list[int]]
    V: list[list[int]]

    @property
    def invariants(self) -> list[int]:
        n = min(len(self.D), len(self.D[0]) if self.D else 0)
        return [self.D[i][i] for i in range(n)]


def _mat(rows: Sequence[Sequence[int]], ncols: int) -> Matrix:
    return Matrix(len(rows), ncols, [int(v) for r in rows for v in r])


def _rows(m: Matrix) -> list[list[int]]:
    return [[int(m[i, j]) for j in range(m.cols)] for i in range(m.rows)]


def smith_normal_form(A: Sequence[Sequence[int]], ncols: int | None = None) -> SmithForm:
    """D = U A V with U, V unimodular, D diagonal, d1 | d2 | ... and d_i >= 0."""
    if ncols is None:
        ncols = len(A[0]) if A else 0
    M = _mat(A, ncols)
    if M.rows == 0:
        D, U, V = M, Matrix.eye(0), Matrix.eye(ncols)
    else:
        D, U, V = smith_normal_decomp(M, domain=ZZ)
    D, U = Matrix(D), Matrix(U)
    for i in range(min(D.rows, D.cols)):
        if D[i, i] < 0:
            D[i, i] = -D[i, i]
            U[i, :] = -U[i, :]
    sf = SmithForm(_rows(D), _rows(U), _rows(Matrix(V)))
    problem = check_smith(A, sf, ncols)
    if problem:
        raise StructuralError(f"Smith normal form certificate failed: {problem}")
    return sf


def check_smith(A: Sequence[Sequence[int]], sf: SmithForm, ncols: int | None = None) -> str | None:
    """Exact re-verification of a Smith form; None when it holds."""
    if ncols is None:
        ncols = len(A[0]) if A else 0
    M = _mat(A, ncols)
    U = _mat(sf.U, M.rows)
    V = _mat(sf.V, ncols)
    D = _mat(sf.D, ncols)
    if U * M * V != D:
        return "U A V != D"
    if M.rows and abs(U.det()) != 1:
        return "U is not unimodular"
    if ncols and abs(V.det()) != 1:
        return "V is not unimodular"
    for i in range(D.rows):
        for j in range(D.cols):
            if i != j and D[i, j] != 0:
                return "D is not diagonal"
    inv = sf.invariants
    for a, b in zip(inv, inv[1:]):
        if a < 0 or (a == 0 and b != 0) or (a != 0 and b % a != 0):
            return f"invariant factors {inv} do not form a divisibility chain"
    return None


# ---------------------------------------------------------------------------
# Group completion


@dataclass
class AbelianGroupPresentation:
    generators: list[str]
    relations: list[list[int]]
    smith: SmithForm
    omitted: list[tuple[str, str]] = field(default_factory=list)
    label: str = "split K0"

    @property
    def rank(self) -> int:
        nz = sum(1 for d in self.smith.invariants if d != 0)
        return len(self.generators) - nz

    @property
    def torsion(self) -> list[int]:
        return [d for d in self.smith.invariants if d > 1]

    def describe(self) -> str:
        parts = [f"Z/{d}" for d in self.torsion] + ["Z"] * self.rank
        return " + ".join(parts) if parts else "0"

    def _free_slots(self) -> list[int]:
        inv = self.smith.invariants
        n = len(self.generators)
        return [i for i in range(n) if i >= len(inv) or inv[i] == 0]

    def coordinates(self, vector: Sequence[int]) -> list[int]:
        """Coordinates of an integer combination of generators in the free part."""
        V = _mat(self.smith.V, len(self.generators))
        y = _mat([list(vector)], len(self.generators)) * V
        return [int(y[0, i]) for i in self._free_slots()]

    def is_basis(self, labels: Sequence[str]) -> bool:
        """Do the classes of the given generators form a basis (no torsion)?"""
        if self.torsion:
            return False
        free = self._free_slots()
        if len(labels) != len(free):
            return False
        rows = []
        for lab in labels:
            e = [1 if g == lab else 0 for g in self.generators]
            rows.append(self.coordinates(e))
        return abs(_mat(rows, len(free)).det()) == 1 if rows else True

    def homomorphism_is_iso(self, values: Sequence[Sequence[int]]) -> bool:
        """Does [g_j] |-> values[j] in Z^m define an isomorphism onto Z^m?"""
        m = len(values[0]) if values else 0
        H = _mat(values, m)
        R = _mat(self.relations, len(self.generators))
        if R.rows and any(v != 0 for v in R * H):
            return False
        if self.torsion or self.rank != m:
            return False
        Vinv = _mat(self.smith.V, len(self.generators)).inv()
        basis = Matrix.vstack(*[Vinv[i, :] for i in self._free_slots()]) if m else Matrix(0, 0, [])
        return abs((basis * H).det()) == 1 if m else True

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "generators": list(self.generators),
            "relations": [list(r) for r in self.relations],
            "invariant_factors": list(self.smith.invariants),
            "rank": self.rank,
            "torsion": self.torsion,
            "group": self.describe(),
            "smith": {"D": self.smith.D, "U": self.smith.U, "V": self.smith.V},
            "omitted_pairs": [list(p) for p in self.omitted],
        }


def group_completion(C: Category, S: SumDesignation, budget: int = DEFAULT_BUDGET,
                     classes: list[list] | None = None) -> AbelianGroupPresentation:
    """Universal abelian group on iso classes with [X] + [Y] = [X + Y]."""
    classes = classes if classes is not None else iso_classes(C, budget)
    oid = C.obj_id
    gens = [oid(c[0]) for c in classes]
    cls_of = {oid(x): i for i, c in enumerate(classes) for x in c}
    reps = [c[0] for c in classes]
    n = len(gens)
    rels: list[list[int]] = []
    omitted: list[tuple[str, str]] = []
    for i, x in enumerate(reps):
        for j in range(i, n):
            y = reps[j]
            try:
                s, _, _ = S.sum(x, y)
            except TruncationError:
                omitted.append((gens[i], gens[j]))
                continue
            k = cls_of.get(oid(s)) if C.has_object(s) else None
            if k is None:
                omitted.append((gens[i], gens[j]))
                continue
            r = [0] * n
            r[i] += 1
            r[j] += 1
            r[k] -= 1
            rels.append(r)
    return AbelianGroupPresentation(gens, rels, smith_normal_form(rels, n), omitted)
