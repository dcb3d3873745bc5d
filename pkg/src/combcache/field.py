"""GF(2^m) arithmetic, sparse symbol vectors and span/rank routines.

Field elements are plain ints in ``[0, 2^m)``. Addition is XOR; multiplication
goes through log/antilog tables built once per field.
"""
from __future__ import annotations

import zlib
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Hashable, Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, InvariantError


@dataclass(frozen=True)
class FieldSpec:
    m: int
    poly: int  # reduction polynomial, primitive, bit m set

    @property
    def order(self) -> int:
        return 1 << self.m

    @property
    def name(self) -> str:
        return f"GF(2^{self.m})"


GF256 = FieldSpec(8, 0x11D)
GF65536 = FieldSpec(16, 0x1100B)
ESCALATE_ABOVE = 200


def field_for(num_sources: int) -> FieldSpec:
    """Default field, switching to GF(2^16) for combinations over many sources."""
    return GF65536 if num_sources > ESCALATE_ABOVE else GF256


@lru_cache(maxsize=None)
def _tables(spec: FieldSpec) -> tuple[list[int], list[int]]:
    q = spec.order
    exp = [0] * (2 * q)
    log = [0] * q
    x = 1
    for i in range(q - 1):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & q:
            x ^= spec.poly
    if x != 1 or len(set(exp[: q - 1])) != q - 1:
        raise ConfigurationError(f"{spec.poly:#x} is not primitive for {spec.name}")
    for i in range(q - 1, 2 * q):
        exp[i] = exp[i - (q - 1)]
    return exp, log


@lru_cache(maxsize=None)
def _np_tables(spec: FieldSpec) -> tuple[np.ndarray, np.ndarray]:
    exp, log = _tables(spec)
    return np.array(exp, dtype=np.int64), np.array(log, dtype=np.int64)


def gf_mul(a: int, b: int, spec: FieldSpec = GF256) -> int:
    if a == 0 or b == 0:
        return 0
    exp, log = _tables(spec)
    return exp[log[a] + log[b]]


def gf_inv(a: int, spec: FieldSpec = GF256) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse")
    exp, log = _tables(spec)
    return exp[(spec.order - 1) - log[a]]


def gf_div(a: int, b: int, spec: FieldSpec = GF256) -> int:
    return gf_mul(a, gf_inv(b, spec), spec)


def gf_pow(a: int, n: int, spec: FieldSpec = GF256) -> int:
    if a == 0:
        return 0 if n else 1
    exp, log = _tables(spec)
    return exp[(log[a] * n) % (spec.order - 1)]


def _salt_base(salt, order: int) -> int:
    return zlib.crc32(repr(salt).encode()) % order


def rlc_matrix(num_combinations: int, source_count: int, spec: FieldSpec = GF256, salt=0) -> np.ndarray:
    """Cauchy matrix ``1 / (x_i + y_j)``; every square submatrix is invertible.

    The ``x_i`` and ``y_j`` are consecutive field elements (mod 2^m) starting at
    a point derived from ``salt``, so the matrix is reproducible. Tall matrices
    are allowed: any ``source_count`` rows are then independent.
    """
    if num_combinations < 0 or source_count < 0:
        raise ValueError("matrix dimensions must be non-negative")
    q = spec.order
    if num_combinations + source_count > q:
        raise ConfigurationError(
            f"{spec.name} has {q} elements but a {num_combinations}x{source_count} "
            f"Cauchy matrix needs {num_combinations + source_count}; "
            + ("use m=16" if spec.m < 16 else "no supported field is large enough")
        )
    exp, log = _np_tables(spec)
    base = _salt_base(salt, q)
    x = (base + np.arange(num_combinations)) % q
    y = (base + num_combinations + np.arange(source_count)) % q
    s = np.bitwise_xor.outer(x, y)
    return exp[(q - 1) - log[s]]


class SymbolVector:
    """Sparse linear combination over an arbitrary hashable basis."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[Hashable, int] | None = None):
        self.coeffs = {c: v for c, v in (coeffs or {}).items() if v}

    @classmethod
    def unit(cls, coord) -> "SymbolVector":
        return cls({coord: 1})

    def __add__(self, other: "SymbolVector") -> "SymbolVector":
        out = dict(self.coeffs)
        for c, v in other.coeffs.items():
            w = out.get(c, 0) ^ v
            if w:
                out[c] = w
            else:
                out.pop(c, None)
        return SymbolVector(out)

    __sub__ = __add__

    def scale(self, a: int, spec: FieldSpec = GF256) -> "SymbolVector":
        return SymbolVector({c: gf_mul(a, v, spec) for c, v in self.coeffs.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, SymbolVector) and self.coeffs == other.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def support(self) -> set:
        return set(self.coeffs)

    def __repr__(self) -> str:
        return f"SymbolVector({self.coeffs!r})"


def combine(coeffs: Iterable[int], vectors: Iterable[SymbolVector], spec: FieldSpec = GF256) -> SymbolVector:
    """sum_i coeffs[i] * vectors[i]."""
    exp, log = _tables(spec)
    out: dict = {}
    for a, vec in zip(coeffs, vectors):
        if not a:
            continue
        la = log[a]
        for c, v in vec.coeffs.items():
            w = out.get(c, 0) ^ exp[la + log[v]]
            if w:
                out[c] = w
            else:
                out.pop(c, None)
    return SymbolVector(out)


class SpanBasis:
    """Incremental Gauss-Jordan basis of sparse vectors over GF(2^m).

    Rows are kept fully reduced: each pivot column occurs only in its own row,
    so membership is a single reduction pass. ``known`` marks coordinates whose
    unit vectors are implicitly in the span (e.g. a user's cache); they are
    dropped on sight instead of being stored. If ``known_value`` is given, every
    inserted vector may carry the symbol it evaluates to and the basis tracks
    those values through elimination, so decoded symbols can be read back.
    """

    def __init__(self, spec: FieldSpec = GF256, known: Callable[[Hashable], bool] | None = None,
                 known_value: Callable[[Hashable], int] | None = None):
        self.spec = spec
        self._known = known
        self._known_value = known_value
        self._rows: dict = {}
        self._vals: dict = {}
        self._occurs: defaultdict = defaultdict(set)  # column -> pivots of rows containing it
        self._exp, self._log = _tables(spec)

    @property
    def rank(self) -> int:
        return len(self._rows)

    def _mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def _axpy(self, row: dict, f: int, src: dict, skip=None) -> None:
        """row += f * src, in place."""
        exp, log = self._exp, self._log
        lf = log[f]
        for c, v in src.items():
            if c == skip:
                continue
            w = row.get(c, 0) ^ (v if f == 1 else exp[lf + log[v]])
            if w:
                row[c] = w
            else:
                del row[c]

    def _reduce(self, vec, value: int) -> tuple[dict, int]:
        coeffs = vec.coeffs if isinstance(vec, SymbolVector) else vec
        known, kval = self._known, self._known_value
        row = {}
        for c, v in coeffs.items():
            if not v:
                continue
            if known is not None and known(c):
                if kval is not None:
                    value ^= self._mul(v, kval(c))
            else:
                row[c] = v
        rows, vals = self._rows, self._vals
        for p in [c for c in row if c in rows]:
            f = row.pop(p)
            self._axpy(row, f, rows[p], skip=p)
            value ^= self._mul(f, vals[p])
        return row, value

    def reduce(self, vec) -> dict:
        return self._reduce(vec, 0)[0]

    def contains(self, vec) -> bool:
        return not self._reduce(vec, 0)[0]

    def insert(self, vec, value: int = 0) -> bool:
        """Add a vector (and the symbol it carries); True if the rank grew."""
        row, value = self._reduce(vec, value)
        if not row:
            return False
        p = next(iter(row))
        f = row[p]
        if f != 1:
            inv = gf_inv(f, self.spec)
            row = {c: self._mul(inv, v) for c, v in row.items()}
            value = self._mul(inv, value)
        rows, vals, occurs = self._rows, self._vals, self._occurs
        for q in occurs.pop(p, ()):
            other = rows[q]
            g = other.pop(p)
            before = set(other)
            self._axpy(other, g, row, skip=p)
            vals[q] ^= self._mul(g, value)
            after = set(other)
            for c in before - after:
                occurs[c].discard(q)
            for c in after - before:
                occurs[c].add(q)
        for c in row:
            if c != p:
                occurs[c].add(p)
        rows[p] = row
        vals[p] = value
        return True

    def extend(self, vecs: Iterable) -> int:
        return sum(self.insert(v) for v in vecs)

    def solved_value(self, coord) -> int | None:
        """The symbol at ``coord`` if it is determined by the span, else None."""
        if self._known is not None and self._known(coord):
            return self._known_value(coord) if self._known_value else None
        row = self._rows.get(coord)
        if row is None or len(row) != 1:
            return None
        return self._vals[coord]


def span_contains(known: Iterable[SymbolVector], target: SymbolVector, spec: FieldSpec = GF256) -> bool:
    basis = SpanBasis(spec)
    basis.extend(known)
    return basis.contains(target)


def _row_reduce(mat: np.ndarray, spec: FieldSpec) -> tuple[np.ndarray, list[int]]:
    exp, log = _np_tables(spec)
    q1 = spec.order - 1
    a = np.array(mat, dtype=np.int64, copy=True)
    if a.ndim != 2:
        raise InvariantError("expected a 2-D matrix")
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        i = r + nz[0]
        if i != r:
            a[[r, i]] = a[[i, r]]
        inv_log = q1 - log[a[r, c]]
        nzr = a[r] != 0
        a[r, nzr] = exp[log[a[r, nzr]] + inv_log]
        f = a[:, c].copy()
        f[r] = 0
        hit = np.nonzero(f)[0]
        if hit.size:
            prow = a[r]
            mask = prow != 0
            lf = log[f[hit]][:, None]
            prod = np.zeros((hit.size, cols), dtype=np.int64)
            prod[:, mask] = exp[lf + log[prow[mask]][None, :]]
            a[hit] ^= prod
        pivots.append(c)
        r += 1
    return a, pivots


def rank(mat, spec: FieldSpec = GF256) -> int:
    mat = np.asarray(mat)
    if mat.size == 0:
        return 0
    return len(_row_reduce(mat, spec)[1])


def solve(a, b, spec: FieldSpec = GF256) -> np.ndarray:
    """Solve ``a x = b`` for square invertible ``a`` (b may be a matrix)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    vec = b.ndim == 1
    if vec:
        b = b[:, None]
    n = a.shape[0]
    if a.shape != (n, n) or b.shape[0] != n:
        raise InvariantError(f"shape mismatch {a.shape} vs {b.shape}")
    red, piv = _row_reduce(np.hstack([a, b]), spec)
    if piv[:n] != list(range(n)):
        raise InvariantError("matrix is singular")
    x = red[:n, n:]
    return x[:, 0] if vec else x


def matmul(a, b, spec: FieldSpec = GF256) -> np.ndarray:
    exp, log = _np_tables(spec)
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for k in range(a.shape[1]):
        col, row = a[:, k], b[k]
        m = (col[:, None] != 0) & (row[None, :] != 0)
        prod = np.where(m, exp[log[col][:, None] + log[row][None, :]], 0)
        out ^= prod
    return out
