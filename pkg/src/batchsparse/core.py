"""Core matrix types, the agreement relation, and exact ground-truth oracles.

Everything in this module is a pure function of its inputs and may touch the
ground-truth signal freely.  Recovery algorithms never import the oracles
here for their own decisions; they see the signal only through the
measurement layer.  Tests and reports use this module as the source of truth.
"""

from __future__ import annotations

import dataclasses

import numpy as np


def _as_finite_array(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def l1_norm(x) -> float:
    """Sum of absolute values of the entries of ``x`` (vector or matrix)."""
    return float(np.abs(_as_finite_array(x)).sum())


@dataclasses.dataclass(frozen=True, eq=False)
class SignalMatrix:
    """Dense n-by-m real matrix; one length-n signal per column."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_finite_array(self.values, "values")
        if arr.ndim != 2:
            raise ValueError("SignalMatrix needs a 2-d array")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("SignalMatrix needs n >= 1 and m >= 1")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j].copy()

    def l1(self) -> float:
        return float(np.abs(self.values).sum())


def as_signal_matrix(a) -> SignalMatrix:
    """Coerce an array-like (or pass through a SignalMatrix)."""
    if isinstance(a, SignalMatrix):
        return a
    return SignalMatrix(np.asarray(a, dtype=np.float64))


class SparseVector:
    """Length-n vector stored as (index, value) pairs, values all nonzero."""

    __slots__ = ("n", "indices", "values")

    def __init__(self, n: int, indices, values):
        n = int(n)
        if n < 1:
            raise ValueError("dimension must be >= 1")
        idx = np.asarray(indices, dtype=np.int64).ravel()
        val = _as_finite_array(values, "values").ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values length mismatch")
        if idx.size:
            order = np.argsort(idx, kind="stable")
            idx, val = idx[order], val[order]
            if idx[0] < 0 or idx[-1] >= n:
                raise ValueError("index out of range")
            if np.any(np.diff(idx) == 0):
                raise ValueError("duplicate indices")
            if np.any(val == 0.0):
                raise ValueError("explicit zero values are not allowed")
        self.n = n
        self.indices = idx
        self.values = val

    @classmethod
    def empty(cls, n: int) -> "SparseVector":
        return cls(n, [], [])

    @classmethod
    def from_dense(cls, x) -> "SparseVector":
        arr = _as_finite_array(x).ravel()
        idx = np.nonzero(arr)[0]
        return cls(arr.size, idx, arr[idx])

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "SparseVector":
        pairs = list(pairs)
        return cls(n, [p[0] for p in pairs], [p[1] for p in pairs])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.indices] = self.values
        return out

    def nnz(self) -> int:
        return int(self.indices.size)

    def l1(self) -> float:
        return float(np.abs(self.values).sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseVector)
            and self.n == other.n
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"SparseVector(n={self.n}, nnz={self.nnz()})"


def sparse_add(a: SparseVector, b: SparseVector) -> SparseVector:
    """Entrywise a + b; overlapping entries are summed, exact zeros dropped."""
    if a.n != b.n:
        raise ValueError("dimension mismatch")
    dense = a.to_dense()
    dense[b.indices] += b.values
    return SparseVector.from_dense(dense)


class SparseMatrix:
    """n-by-m matrix stored as (row, col, value) triplets, values all nonzero.

    Triplets are kept sorted by (col, row) so equality and iteration are
    canonical.  nnz() is the number of stored entries.
    """

    __slots__ = ("n", "m", "rows", "cols", "vals")

    def __init__(self, n: int, m: int, rows, cols, vals):
        n, m = int(n), int(m)
        if n < 1 or m < 1:
            raise ValueError("dimensions must be >= 1")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = _as_finite_array(vals, "values").ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("triplet arrays must have equal length")
        if rows.size:
            order = np.lexsort((rows, cols))
            rows, cols, vals = rows[order], cols[order], vals[order]
            if rows[0] < 0 or rows.max() >= n or cols[0] < 0 or cols.max() >= m:
                raise ValueError("triplet index out of range")
            same = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if np.any(same):
                raise ValueError("duplicate (row, col) pairs")
            if np.any(vals == 0.0):
                raise ValueError("explicit zero values are not allowed")
        self.n, self.m = n, m
        self.rows, self.cols, self.vals = rows, cols, vals

    @classmethod
    def zeros(cls, n: int, m: int) -> "SparseMatrix":
        return cls(n, m, [], [], [])

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        arr = _as_finite_array(a, "a")
        if arr.ndim != 2:
            raise ValueError("need a 2-d array")
        r, c = np.nonzero(arr)
        return cls(arr.shape[0], arr.shape[1], r, c, arr[r, c])

    @classmethod
    def from_columns(cls, n: int, m: int, columns: dict) -> "SparseMatrix":
        """Assemble from a {col index: SparseVector} mapping."""
        rows, cols, vals = [], [], []
        for j, sv in columns.items():
            if sv.n != n:
                raise ValueError("column dimension mismatch")
            rows.append(sv.indices)
            cols.append(np.full(sv.nnz(), j, dtype=np.int64))
            vals.append(sv.values)
        if not rows:
            return cls.zeros(n, m)
        return cls(n, m, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.m))
        out[self.rows, self.cols] = self.vals
        return out

    def column(self, j: int) -> SparseVector:
        mask = self.cols == j
        return SparseVector(self.n, self.rows[mask], self.vals[mask])

    def nnz(self) -> int:
        return int(self.vals.size)

    def l1(self) -> float:
        return float(np.abs(self.vals).sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseMatrix)
            and (self.n, self.m) == (other.n, other.m)
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )

    def __repr__(self) -> str:
        return f"SparseMatrix(n={self.n}, m={self.m}, nnz={self.nnz()})"


@dataclasses.dataclass(frozen=True)
class TailError:
    """l1 mass of a matrix outside its km largest-magnitude entries."""

    eps_opt: float

    def __post_init__(self):
        if not np.isfinite(self.eps_opt) or self.eps_opt < 0:
            raise ValueError("eps_opt must be finite and >= 0")


def agrees(u: SparseVector, v) -> bool:
    """True iff supp(u) is contained in supp(v) and u matches v there.

    The relation is not symmetric.  Comparison is exact; no tolerance.
    """
    arr = _as_finite_array(v, "v").ravel()
    if arr.size != u.n:
        raise ValueError("dimension mismatch")
    if u.nnz() == 0:
        return True
    # u values are nonzero by invariant, so equality also forces v != 0 there.
    return bool(np.all(arr[u.indices] == u.values))


def optimal_tail_error(a, k: int) -> TailError:
    """Best achievable l1 error over all km-sparse approximations of ``a``.

    The unconstrained km-sparse minimizer keeps the km globally largest
    magnitudes, so a single sort suffices.  Ties may be broken arbitrarily;
    every tie-break gives the same sum.  This is the oracle of record for
    reports and tests.
    """
    mat = as_signal_matrix(a)
    k = int(k)
    if k < 1 or k > mat.n:
        raise ValueError(f"k must be in [1, {mat.n}], got {k}")
    budget = k * mat.m
    mags = np.sort(np.abs(mat.values), axis=None)
    kept = min(budget, mags.size)
    tail = mags[: mags.size - kept]
    return TailError(float(tail.sum()))


def truncate_top_s(a, s: int) -> SparseMatrix:
    """Keep the s largest-magnitude entries of ``a`` as a SparseMatrix.

    Ties are broken by (col, row) lexicographic order, smallest kept first,
    so runs are reproducible.  Zero entries are never stored.
    """
    if isinstance(a, SparseMatrix):
        n, m = a.n, a.m
        rows, cols, vals = a.rows, a.cols, a.vals
    else:
        mat = as_signal_matrix(a)
        n, m = mat.n, mat.m
        rows, cols = np.nonzero(mat.values)
        vals = mat.values[rows, cols]
    s = int(s)
    if s < 0 or s > n * m:
        raise ValueError(f"s must be in [0, {n * m}], got {s}")
    if s == 0 or vals.size == 0:
        return SparseMatrix.zeros(n, m)
    # lexsort: last key is primary, so order by -|v|, then col, then row.
    order = np.lexsort((rows, cols, -np.abs(vals)))
    keep = order[: min(s, vals.size)]
    return SparseMatrix(n, m, rows[keep], cols[keep], vals[keep])


def matrix_sub(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Exact entrywise a - b; entries that cancel exactly are dropped."""
    if (a.n, a.m) != (b.n, b.m):
        raise ValueError("dimension mismatch")
    dense = a.to_dense()
    dense[b.rows, b.cols] -= b.vals
    return SparseMatrix.from_dense(dense)


def column_residual_l1(a, estimate: SparseMatrix, j: int) -> float:
    """l1 distance between column j of the ground truth and of the estimate.

    Report/test use only; recovery algorithms never see this.
    """
    mat = as_signal_matrix(a)
    if (mat.n, mat.m) != (estimate.n, estimate.m):
        raise ValueError("dimension mismatch")
    if j < 0 or j >= mat.m:
        raise ValueError("column index out of range")
    return float(np.abs(mat.column(j) - estimate.column(j).to_dense()).sum())


def matrix_l1_error(a, estimate: SparseMatrix) -> float:
    """l1 distance between the ground truth and the estimate, whole matrix."""
    mat = as_signal_matrix(a)
    if (mat.n, mat.m) != (estimate.n, estimate.m):
        raise ValueError("dimension mismatch")
    return float(np.abs(mat.values - estimate.to_dense()).sum())
