"""Dense matrices over prime fields.

Matrices are immutable and carry their shape, so zero-dimensional blocks
(maps into or out of the zero space) keep their column/row counts.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence


class Mat:
    """Immutable matrix with a cached hash (matrices are used as dict keys)."""

    __slots__ = ("nrows", "ncols", "entries", "_hash")

    def __init__(self, nrows: int, ncols: int, entries: tuple[int, ...]):
        object.__setattr__(self, "nrows", nrows)
        object.__setattr__(self, "ncols", ncols)
        object.__setattr__(self, "entries", tuple(entries))
        object.__setattr__(self, "_hash", hash((nrows, ncols, self.entries)))

    def __setattr__(self, name, value):
        raise AttributeError("Mat is immutable")

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Mat):
            return NotImplemented
        return self._hash == other._hash and self.entries == other.entries and self.ncols == other.ncols \
            and self.nrows == other.nrows

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Mat({self.nrows}, {self.ncols}, {self.entries})"

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], ncols: int | None = None, p: int | None = None) -> "Mat":
        if ncols is None:
            ncols = len(rows[0]) if rows else 0
        flat: list[int] = []
        for r in rows:
            if len(r) != ncols:
                raise ValueError("ragged matrix")
            flat.extend(r)
        if p is not None:
            flat = [x % p for x in flat]
        return cls(len(rows), ncols, tuple(flat))

    @classmethod
    def zero(cls, nrows: int, ncols: int) -> "Mat":
        return cls(nrows, ncols, (0,) * (nrows * ncols))

    @classmethod
    def identity(cls, n: int) -> "Mat":
        return cls(n, n, tuple(1 if i == j else 0 for i in range(n) for j in range(n)))

    @classmethod
    def unit(cls, nrows: int, ncols: int, i: int, j: int) -> "Mat":
        e = [0] * (nrows * ncols)
        e[i * ncols + j] = 1
        return cls(nrows, ncols, tuple(e))

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return self.entries[i * self.ncols + j]

    def rows(self) -> list[tuple[int, ...]]:
        c = self.ncols
        return [self.entries[i * c:(i + 1) * c] for i in range(self.nrows)]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def is_zero(self) -> bool:
        return not any(self.entries)

    def text(self) -> str:
        """Compact form: rows separated by '/', entries by ','."""
        if self.nrows == 0 or self.ncols == 0:
            return f"0x{self.nrows}x{self.ncols}"
        return "/".join(",".join(str(x) for x in r) for r in self.rows())

    @classmethod
    def parse(cls, s: str, nrows: int, ncols: int, p: int) -> "Mat":
        if nrows == 0 or ncols == 0:
            return cls.zero(nrows, ncols)
        rows = [[int(x) for x in r.split(",")] for r in s.split("/")]
        if len(rows) != nrows:
            raise ValueError(f"expected {nrows} rows in {s!r}")
        return cls.from_rows(rows, ncols, p)


@lru_cache(maxsize=1 << 16)
def mul(a: Mat, b: Mat, p: int) -> Mat:
    if a.ncols != b.nrows:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    n, k, m = a.nrows, a.ncols, b.ncols
    ae, be = a.entries, b.entries
    out = []
    for i in range(n):
        row = ae[i * k:(i + 1) * k]
        for j in range(m):
            s = 0
            for t in range(k):
                x = row[t]
                if x:
                    s += x * be[t * m + j]
            out.append(s % p)
    return Mat(n, m, tuple(out))


@lru_cache(maxsize=1 << 16)
def add(a: Mat, b: Mat, p: int) -> Mat:
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    return Mat(a.nrows, a.ncols, tuple((x + y) % p for x, y in zip(a.entries, b.entries)))


def scale(a: Mat, c: int, p: int) -> Mat:
    return Mat(a.nrows, a.ncols, tuple((c * x) % p for x in a.entries))


@lru_cache(maxsize=1 << 16)
def kron(a: Mat, b: Mat, p: int) -> Mat:
    """Kronecker product; basis e_i (x) f_j sits at index i*dim(f) + j."""
    n = a.nrows * b.nrows
    m = a.ncols * b.ncols
    out = [0] * (n * m)
    for i in range(a.nrows):
        for j in range(a.ncols):
            x = a[i, j]
            if not x:
                continue
            for k in range(b.nrows):
                for l in range(b.ncols):
                    y = b[k, l]
                    if y:
                        out[(i * b.nrows + k) * m + j * b.ncols + l] = (x * y) % p
    return Mat(n, m, tuple(out))


@lru_cache(maxsize=1 << 16)
def commutation(m: int, n: int) -> Mat:
    """Permutation matrix sending e_i (x) f_j to f_j (x) e_i for dims m, n."""
    out = [0] * (m * n * m * n)
    for i in range(m):
        for j in range(n):
            src = i * n + j
            dst = j * m + i
            out[dst * (m * n) + src] = 1
    return Mat(m * n, m * n, tuple(out))


def vec(a: Mat) -> tuple[int, ...]:
    return a.entries


def row_reduce(rows: list[list[int]], ncols: int, p: int) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    m = [list(r) for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] % p), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = pow(m[r][c], -1, p)
        m[r] = [(x * inv) % p for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] % p:
                f = m[i][c]
                m[i] = [(x - f * y) % p for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(vectors: Iterable[Sequence[int]], ncols: int, p: int) -> int:
    rows = [list(v) for v in vectors]
    if not rows or ncols == 0:
        return 0
    return len(row_reduce(rows, ncols, p)[1])


def nullspace(columns: Sequence[Sequence[int]], nrows: int, p: int) -> list[tuple[int, ...]]:
    """Basis of {x : sum_j x_j * columns[j] = 0}.

    ``columns`` lists the images of the standard basis vectors, each of
    length ``nrows``.
    """
    ncols = len(columns)
    if ncols == 0:
        return []
    rows = [[columns[j][i] % p for j in range(ncols)] for i in range(nrows)]
    red, pivots = row_reduce(rows, ncols, p) if rows else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        x = [0] * ncols
        x[f] = 1
        for row, pc in zip(red, pivots):
            x[pc] = (-row[f]) % p
        basis.append(tuple(x))
    return basis


def solve(columns: Sequence[Sequence[int]], target: Sequence[int], p: int) -> tuple[int, ...] | None:
    """One solution x of sum_j x_j * columns[j] = target, or None."""
    ncols = len(columns)
    nrows = len(target)
    rows = [[columns[j][i] % p for j in range(ncols)] + [target[i] % p] for i in range(nrows)]
    if not rows:
        return (0,) * ncols
    red, pivots = row_reduce(rows, ncols + 1, p)
    if ncols in pivots:
        return None
    x = [0] * ncols
    for row, pc in zip(red, pivots):
        x[pc] = row[ncols]
    return tuple(x)


def is_invertible(a: Mat, p: int) -> bool:
    return a.nrows == a.ncols and rank(a.rows(), a.ncols, p) == a.nrows


def inverse(a: Mat, p: int) -> Mat:
    n = a.nrows
    if a.ncols != n:
        raise ValueError("not square")
    rows = [list(r) + [1 if i == j else 0 for j in range(n)] for i, r in enumerate(a.rows())]
    red, pivots = row_reduce(rows, 2 * n, p)
    if pivots[:n] != list(range(n)) or len(red) < n:
        raise ValueError("singular matrix")
    return Mat(n, n, tuple(x for r in red for x in r[n:]))
