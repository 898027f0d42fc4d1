"""
Linear algebra over Z/p^kZ: Smith normal form, Howell form, kernels and
solution counts.

Every element of Z/p^kZ is a unit times p^v, so elimination always pivots
on an entry of minimal valuation and divides exactly by it.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch
from .ring_core import INT64_SAFE_MODULUS, inverse_mod, mat_mul, poly_at_matrix, valuation

logger = logging.getLogger(__name__)


def residue_dtype(modulus: int):
    return np.int64 if modulus < INT64_SAFE_MODULUS else object


def as_residues(entries, modulus: int, shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Copy ``entries`` into a reduced array of the right dtype."""
    arr = np.array(entries, dtype=object)
    if shape is not None:
        arr = arr.reshape(shape)
    arr = np.mod(arr, modulus)
    return arr.astype(residue_dtype(modulus))


def valuation_array(A: np.ndarray, p: int, k: int) -> np.ndarray:
    """Entrywise p-adic valuation, with v(0) = k."""
    A = np.mod(A, p ** k)
    v = np.zeros(A.shape, dtype=np.int64)
    power = 1
    for _ in range(k):
        power *= p
        v += (np.mod(A, power) == 0)
    return v


@dataclass(frozen=True)
class MatrixZpk:
    """A rows x cols matrix over Z/p^kZ."""
    p: int
    k: int
    entries: np.ndarray

    def __post_init__(self):
        arr = self.entries
        if arr.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-dimensional, got shape {arr.shape}")
        object.__setattr__(self, 'entries', as_residues(arr, self.modulus))
        self.entries.flags.writeable = False

    @property
    def modulus(self) -> int:
        return self.p ** self.k

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def from_rows(cls, p: int, k: int, rows: Sequence[Sequence[int]]) -> 'MatrixZpk':
        return cls(p, k, np.array(rows, dtype=object).reshape(len(rows), -1 if rows else 0))

    @classmethod
    def identity(cls, p: int, k: int, n: int) -> 'MatrixZpk':
        return cls(p, k, np.eye(n, dtype=np.int64))

    @classmethod
    def zeros(cls, p: int, k: int, rows: int, cols: int) -> 'MatrixZpk':
        return cls(p, k, np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def from_dict(cls, p: int, k: int, data: Dict) -> 'MatrixZpk':
        """Parse ``{"rows": n, "cols": m, "entries": [row-major integers]}``."""
        try:
            rows, cols, entries = int(data['rows']), int(data['cols']), list(data['entries'])
        except (KeyError, TypeError, ValueError) as e:
            raise DimensionMismatch(f"matrix JSON needs rows, cols and entries: {e}")
        if len(entries) != rows * cols:
            raise DimensionMismatch(f"expected {rows * cols} entries, got {len(entries)}")
        return cls(p, k, np.array(entries, dtype=object).reshape(rows, cols))

    def to_dict(self) -> Dict:
        return {'rows': self.rows, 'cols': self.cols, 'entries': [int(x) for x in self.entries.flatten()]}

    def __matmul__(self, other: 'MatrixZpk') -> 'MatrixZpk':
        if self.cols != other.rows:
            raise DimensionMismatch(f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        return MatrixZpk(self.p, self.k, mat_mul(self.entries, other.entries, self.modulus))

    def __add__(self, other: 'MatrixZpk') -> 'MatrixZpk':
        return MatrixZpk(self.p, self.k, self.entries.astype(object) + other.entries.astype(object))

    def __sub__(self, other: 'MatrixZpk') -> 'MatrixZpk':
        return MatrixZpk(self.p, self.k, self.entries.astype(object) - other.entries.astype(object))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MatrixZpk):
            return NotImplemented
        return (self.p, self.k) == (other.p, other.k) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.p, self.k, self.entries.shape, tuple(int(x) for x in self.entries.flatten())))

    def reduce(self, k: int) -> 'MatrixZpk':
        return MatrixZpk(self.p, k, self.entries)


@dataclass(frozen=True, eq=False)
class SnfResult:
    """
    Smith normal form data: U·M·V = D with D_ii = p^{v_i}.

    ``valuations`` has one entry per row of M; rows beyond the column count
    are padded with k, so cok(M) ≅ ⊕ (Z/p^kZ)/(p^{v_i}) always holds.
    """
    p: int
    k: int
    valuations: Tuple[int, ...]
    U: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    U_inv: Optional[np.ndarray] = None

    @property
    def partition(self) -> Tuple[int, ...]:
        """Abelian type of the cokernel, largest part first."""
        return tuple(sorted((v for v in self.valuations if v > 0), reverse=True))

    @property
    def log_order(self) -> int:
        return sum(self.valuations)

    @property
    def order(self) -> int:
        return self.p ** self.log_order

    def diagonal(self, cols: int) -> np.ndarray:
        D = np.zeros((len(self.valuations), cols), dtype=residue_dtype(self.p ** self.k))
        for i, v in enumerate(self.valuations[:cols]):
            D[i, i] = (self.p ** v) % (self.p ** self.k)
        return D


def smith_normal_form(M: MatrixZpk, transforms: bool = False) -> SnfResult:
    """
    Diagonalize M over Z/p^kZ.

    Args:
        M: matrix to reduce
        transforms: also accumulate U, V (and U⁻¹) with U·M·V = D

    Returns:
        SnfResult with weakly increasing valuations
    """
    p, k, mod = M.p, M.k, M.modulus
    A = M.entries.copy()
    A.flags.writeable = True
    r, c = A.shape
    dtype = A.dtype
    U = np.eye(r, dtype=dtype) if transforms else None
    U_inv = np.eye(r, dtype=dtype) if transforms else None
    V = np.eye(c, dtype=dtype) if transforms else None
    vals: List[int] = []

    for t in range(min(r, c)):
        sub_vals = valuation_array(A[t:, t:], p, k)
        flat = int(np.argmin(sub_vals))
        i0, j0 = divmod(flat, c - t)
        v = int(sub_vals[i0, j0])
        if v == k:
            break
        i0, j0 = i0 + t, j0 + t
        if i0 != t:
            A[[t, i0], :] = A[[i0, t], :]
            if transforms:
                U[[t, i0], :] = U[[i0, t], :]
                U_inv[:, [t, i0]] = U_inv[:, [i0, t]]
        if j0 != t:
            A[:, [t, j0]] = A[:, [j0, t]]
            if transforms:
                V[:, [t, j0]] = V[:, [j0, t]]

        pv = p ** v
        unit = int(A[t, t]) // pv
        unit_inv = inverse_mod(unit, mod)
        A[t, :] = np.mod(A[t, :] * unit_inv, mod)
        if transforms:
            U[t, :] = np.mod(U[t, :] * unit_inv, mod)
            U_inv[:, t] = np.mod(U_inv[:, t] * unit, mod)

        factors = A[t + 1:, t] // pv
        if np.any(factors):
            A[t + 1:, :] = np.mod(A[t + 1:, :] - np.outer(factors, A[t, :]), mod)
            if transforms:
                U[t + 1:, :] = np.mod(U[t + 1:, :] - np.outer(factors, U[t, :]), mod)
                U_inv[:, t] = np.mod(U_inv[:, t] + mat_mul(U_inv[:, t + 1:], factors.reshape(-1, 1), mod)[:, 0], mod)

        col_factors = A[t, t + 1:] // pv
        if np.any(col_factors):
            A[t, t + 1:] = 0
            if transforms:
                V[:, t + 1:] = np.mod(V[:, t + 1:] - np.outer(V[:, t], col_factors), mod)
        vals.append(v)

    vals += [k] * (r - len(vals))
    return SnfResult(p=p, k=k, valuations=tuple(vals), U=U, V=V, U_inv=U_inv)


@dataclass(frozen=True, eq=False)
class HowellResult:
    """
    Canonical generators of a row module over Z/p^kZ.

    ``pivots`` lists (column, valuation) for each row of ``rows``; a pivot
    entry equals p^valuation and entries above it are reduced modulo it.
    """
    p: int
    k: int
    rows: np.ndarray
    pivots: Tuple[Tuple[int, int], ...]
    kernel: Optional[np.ndarray] = None

    @property
    def span_log_size(self) -> int:
        return sum(self.k - v for _, v in self.pivots)

    @property
    def span_size(self) -> int:
        return self.p ** self.span_log_size


def _howell_rows(A: np.ndarray, p: int, k: int) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    mod = p ** k
    dtype = residue_dtype(mod)
    cols = A.shape[1]
    pool = [row for row in np.mod(A, mod).astype(dtype) if np.any(row)]
    result: List[np.ndarray] = []
    pivots: List[Tuple[int, int]] = []

    for col in range(cols):
        if not pool:
            break
        vals = [valuation(int(row[col]), p, k) for row in pool]
        best = min(range(len(pool)), key=lambda i: vals[i])
        v = vals[best]
        if v == k:
            continue
        pivot = pool.pop(best)
        pv = p ** v
        pivot = np.mod(pivot * inverse_mod(int(pivot[col]) // pv, mod), mod).astype(dtype)
        reduced = []
        for row in pool:
            if row[col] != 0:
                row = np.mod(row - (int(row[col]) // pv) * pivot, mod).astype(dtype)
            if np.any(row):
                reduced.append(row)
        if v > 0:
            # p^{k-v} * pivot vanishes at col but may not later
            extra = np.mod(pivot * (p ** (k - v)), mod).astype(dtype)
            if np.any(extra):
                reduced.append(extra)
        pool = reduced
        result.append(pivot)
        pivots.append((col, v))

    for i, (col, v) in enumerate(pivots):
        pv = p ** v
        for j in range(i):
            q = int(result[j][col]) // pv
            if q:
                result[j] = np.mod(result[j] - q * result[i], mod).astype(dtype)

    rows = np.array(result, dtype=dtype).reshape(len(result), cols)
    return rows, pivots


def howell_form(M: MatrixZpk, with_kernel: bool = True) -> HowellResult:
    """
    Howell form of the row span of M, and a kernel basis {x : xM = 0}.

    The kernel comes from reducing [M | I]: the rows whose M-part vanishes
    span exactly the left kernel.
    """
    p, k, mod = M.p, M.k, M.modulus
    r, c = M.rows, M.cols
    rows, pivots = _howell_rows(M.entries, p, k)
    kernel = None
    if with_kernel:
        aug = np.concatenate([M.entries.astype(object), np.eye(r, dtype=object)], axis=1)
        aug_rows, aug_pivots = _howell_rows(aug, p, k)
        keep = [i for i, (col, _) in enumerate(aug_pivots) if col >= c]
        kernel = aug_rows[keep, c:] if keep else np.zeros((0, r), dtype=residue_dtype(mod))
    return HowellResult(p=p, k=k, rows=rows, pivots=tuple(pivots), kernel=kernel)


def span_log_size(vectors: np.ndarray, p: int, k: int) -> int:
    """log_p of the size of the row span of ``vectors``."""
    if vectors.shape[0] == 0 or vectors.shape[1] == 0:
        return 0
    _, pivots = _howell_rows(vectors, p, k)
    return sum(k - v for _, v in pivots)


def count_solutions(A: MatrixZpk, relations: Optional[np.ndarray] = None,
                    unknown_relations: Optional[np.ndarray] = None) -> int:
    """
    Count x in (Z/p^kZ)^m / span(unknown_relations) with x·A ∈ span(relations).

    Row-vector convention: x has one coordinate per row of A, the equations
    land in (Z/p^kZ)^cols modulo the rows of ``relations``. Unknowns are
    counted modulo ``unknown_relations``, whose span must solve the system.
    """
    p, k = A.p, A.k
    m, n = A.rows, A.cols
    B = np.zeros((0, n), dtype=object) if relations is None else np.asarray(relations, dtype=object)
    if B.ndim != 2 or B.shape[1] != n:
        raise DimensionMismatch(f"relations must have {n} columns, got shape {B.shape}")
    W = np.zeros((0, m), dtype=object) if unknown_relations is None else np.asarray(unknown_relations, dtype=object)
    if W.ndim != 2 or W.shape[1] != m:
        raise DimensionMismatch(f"unknown relations must have {m} columns, got shape {W.shape}")

    if n == 0:
        solution_log = m * k
    else:
        stacked = MatrixZpk(p, k, np.concatenate([A.entries.astype(object), B], axis=0))
        kernel = howell_form(stacked).kernel
        solution_log = span_log_size(kernel[:, :m], p, k)
    return p ** (solution_log - span_log_size(W, p, k))


def eval_poly_at_matrix(poly: Sequence[int], X: MatrixZpk) -> MatrixZpk:
    """P(X) by Horner's rule."""
    if X.rows != X.cols:
        raise DimensionMismatch(f"P(X) needs a square matrix, got {X.rows}x{X.cols}")
    return MatrixZpk(X.p, X.k, poly_at_matrix(poly, X.entries, X.modulus))


def is_invertible(M: MatrixZpk) -> bool:
    if M.rows != M.cols:
        return False
    return all(v == 0 for v in smith_normal_form(M).valuations)
