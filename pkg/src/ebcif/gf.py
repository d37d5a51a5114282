"""Dense linear algebra over GF(2^q).

Elements are stored as plain integers ``0 <= a < 2**q`` in numpy int64
arrays.  Addition is XOR; multiplication goes through log/exp tables built
once per field from a fixed irreducible polynomial, so results are
bit-identical everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, RankDeficient

# Fixed irreducible polynomials, bit i = coefficient of x^i.
IRREDUCIBLE = {
    1: 0b11,  # x + 1
    2: 0b111,
    3: 0b1011,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11B,  # x^8 + x^4 + x^3 + x + 1
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}

MAX_RESAMPLES = 64


def _clmul_mod(a: int, b: int, poly: int, q: int) -> int:
    """Carry-less product of a and b reduced modulo poly."""
    out = 0
    top = 1 << q
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return out


class Field:
    """GF(2^q) with vectorised elementwise arithmetic."""

    def __init__(self, q: int):
        if not 1 <= q <= 16:
            raise ValueError(f"field exponent must be in [1, 16], got {q}")
        self.q = q
        self.order = 1 << q
        self.poly = IRREDUCIBLE[q]
        n = self.order - 1  # multiplicative group order
        gen, powers = self._find_generator()
        self.generator = gen
        self.exp = np.array(powers + powers, dtype=np.int64)
        self.log = np.zeros(self.order, dtype=np.int64)
        self.log[np.array(powers, dtype=np.int64)] = np.arange(n, dtype=np.int64)

    def _find_generator(self) -> tuple[int, list[int]]:
        n = self.order - 1
        if n == 1:
            return 1, [1]
        for g in range(2, self.order):
            powers = [1]
            x = 1
            for _ in range(n - 1):
                x = _clmul_mod(x, g, self.poly, self.q)
                if x == 1:
                    break
                powers.append(x)
            if len(powers) == n:
                return g, powers
        raise RuntimeError(f"polynomial {self.poly:#x} is not irreducible")

    def __repr__(self) -> str:
        return f"Field(q={self.q}, poly={self.poly:#x})"

    def mul(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = self.exp[self.log[a] + self.log[b]]
        return np.where((a == 0) | (b == 0), 0, out)

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return self.exp[(self.order - 1 - self.log[a]) % (self.order - 1)]

    def random(self, rng: np.random.Generator, shape, nonzero: bool = False):
        if nonzero:
            return rng.integers(1, self.order, size=shape, dtype=np.int64)
        return rng.integers(0, self.order, size=shape, dtype=np.int64)


@lru_cache(maxsize=None)
def field(q: int = 8) -> Field:
    return Field(q)


@dataclass(frozen=True, eq=False)
class FieldMatrix:
    """A rows x cols matrix with entries in GF(2^q)."""

    data: np.ndarray
    q: int = 8

    def __post_init__(self):
        if not 1 <= self.q <= 16:
            raise ValueError(f"field exponent must be in [1, 16], got {self.q}")
        arr = np.array(self.data, dtype=np.int64, copy=True)
        if arr.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D array, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() >= (1 << self.q)):
            raise ValueError(f"entries must lie in [0, {1 << self.q})")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_rows(cls, rows, q: int = 8) -> FieldMatrix:
        return cls(np.array(rows, dtype=np.int64).reshape(len(rows), -1), q)

    @classmethod
    def identity(cls, n: int, q: int = 8) -> FieldMatrix:
        return cls(np.eye(n, dtype=np.int64), q)

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int = 8) -> FieldMatrix:
        return cls(np.zeros((rows, cols), dtype=np.int64), q)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def entries(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.data.ravel())

    @property
    def field(self) -> Field:
        return field(self.q)

    def __eq__(self, other):
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.data, other.data)

    def __matmul__(self, other):
        if isinstance(other, FieldMatrix):
            if other.q != self.q:
                raise ValueError("field mismatch")
            return FieldMatrix(matmul(self.data, other.data, self.q), self.q)
        return matmul(self.data, np.asarray(other), self.q)

    def __repr__(self) -> str:
        return f"FieldMatrix(q={self.q}, shape={self.data.shape})"


def matmul(a: np.ndarray, b: np.ndarray, q: int = 8) -> np.ndarray:
    """Product of two integer arrays interpreted over GF(2^q).

    ``b`` may be 1-D, in which case the result is 1-D.
    """
    f = field(q)
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    vec = b.ndim == 1
    if vec:
        b = b[:, None]
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for k in range(a.shape[1]):
        col = a[:, k]
        if not col.any():
            continue
        out ^= f.mul(col[:, None], b[k][None, :])
    return out[:, 0] if vec else out


def _eliminate(work: np.ndarray, f: Field, pivot_cols: int) -> list[int]:
    """In-place Gauss-Jordan elimination; pivots searched in the first pivot_cols columns."""
    nrows = work.shape[0]
    pivots: list[int] = []
    r = 0
    for c in range(pivot_cols):
        if r == nrows:
            break
        nz = np.flatnonzero(work[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            work[[r, p]] = work[[p, r]]
        lead = int(work[r, c])
        if lead != 1:
            work[r] = f.mul(work[r], f.inv(lead))
        factors = work[:, c].copy()
        factors[r] = 0
        hit = np.flatnonzero(factors)
        if hit.size:
            work[hit] ^= f.mul(factors[hit, None], work[r][None, :])
        pivots.append(c)
        r += 1
    return pivots


def rref(m: FieldMatrix) -> tuple[FieldMatrix, list[int]]:
    """Reduced row-echelon form and pivot column list."""
    work = np.array(m.data, dtype=np.int64)
    pivots = _eliminate(work, m.field, m.cols)
    return FieldMatrix(work, m.q), pivots


def rank(m: FieldMatrix) -> int:
    work = np.array(m.data, dtype=np.int64)
    return len(_eliminate(work, m.field, m.cols))


def _augment(a: FieldMatrix, y) -> tuple[np.ndarray, bool]:
    y = np.asarray(y, dtype=np.int64)
    vec = y.ndim == 1
    y2 = y[:, None] if vec else y
    if y2.ndim != 2 or y2.shape[0] != a.rows:
        raise DimensionMismatch(
            f"right-hand side has {y2.shape[0] if y2.ndim else 0} rows, matrix has {a.rows}"
        )
    if y2.size and (y2.min() < 0 or y2.max() >= (1 << a.q)):
        raise ValueError("right-hand side has entries outside the field")
    return np.concatenate([a.data, y2], axis=1), vec


def solve(a: FieldMatrix, y) -> np.ndarray:
    """Unique x with a @ x = y.  ``y`` may be a vector or a rows x L block."""
    work, vec = _augment(a, y)
    pivots = _eliminate(work, a.field, a.cols)
    if len(pivots) < a.cols:
        raise RankDeficient(f"rank {len(pivots)} < {a.cols} columns")
    if work[a.cols :, a.cols :].any():
        raise ValueError("inconsistent system: no x satisfies a @ x = y")
    x = work[: a.cols, a.cols :]
    return x[:, 0].copy() if vec else x.copy()


def solve_partial(a: FieldMatrix, y, wanted) -> np.ndarray:
    """Recover only the unknowns listed in ``wanted``; the rest are nuisance.

    Raises RankDeficient when the equations do not pin the wanted unknowns down.
    """
    wanted = [int(c) for c in wanted]
    wanted_set = set(wanted)
    nuisance = [c for c in range(a.cols) if c not in wanted_set]
    order = nuisance + wanted
    reordered = FieldMatrix(a.data[:, order], a.q) if a.rows else a
    work, vec = _augment(reordered, y)
    pivots = _eliminate(work, a.field, a.cols)
    split = len(nuisance)
    got = [p for p in pivots if p >= split]
    if len(got) < len(wanted):
        raise RankDeficient(f"{len(got)} of {len(wanted)} wanted unknowns determined")
    rows = [i for i, p in enumerate(pivots) if p >= split]
    x = work[rows, a.cols :]
    return x[:, 0].copy() if vec else x.copy()


def random_mds_like(rows: int, cols: int, rng: np.random.Generator, q: int = 8) -> FieldMatrix:
    """Random coefficient matrix whose leading min(rows, cols) rows have full rank.

    Remaining rows are i.i.d. uniform, so any cols received rows decode with
    high probability for large q.
    """
    if cols < 1 or rows < 0:
        raise ValueError("need cols >= 1 and rows >= 0")
    f = field(q)
    lead = min(rows, cols)
    for _ in range(MAX_RESAMPLES):
        top = f.random(rng, (lead, cols))
        if rank(FieldMatrix(top, q)) == lead:
            break
    else:
        raise RuntimeError("random_mds_like: 64 consecutive rank-deficient draws; RNG misuse?")
    rest = f.random(rng, (rows - lead, cols))
    return FieldMatrix(np.concatenate([top, rest], axis=0), q)
