"""Measurement oracle and cost model.

Every linear query against a signal column goes through a :class:`ColumnHandle`
and is counted on a shared :class:`MeasurementLedger`, grouped into explicit
adaptive rounds.  Recovery algorithms receive handles and may call only
``measure`` / ``measure_batch`` / ``shifted``; they never read the hidden
matrix directly.  Sensing vectors built inside a round must depend only on
results from strictly earlier rounds; that contract is a convention of the
callers and is exercised by the test suite through ledger sequencing.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from .core import SignalMatrix, as_signal_matrix


class LedgerError(RuntimeError):
    """Raised on round misuse: nested/dangling rounds, measuring outside one."""


class MeasurementLedger:
    """Per-column measurement counters plus an adaptive-round counter.

    Counters never decrease.  ``rounds`` is the number of *completed* rounds;
    every charge must happen while a round is open.  Counter updates are
    guarded by a lock so handles for distinct columns can be queried
    concurrently within a round.
    """

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("need at least one column")
        self._per_column = np.zeros(m, dtype=np.int64)
        self._rounds_done = 0
        self._open = False
        self._lock = threading.Lock()

    @property
    def m(self) -> int:
        return self._per_column.size

    @property
    def rounds(self) -> int:
        return self._rounds_done

    @property
    def round_open(self) -> bool:
        return self._open

    @property
    def open_round_id(self) -> int:
        """1-based id of the currently open round."""
        if not self._open:
            raise LedgerError("no round is open")
        return self._rounds_done + 1

    def begin_round(self) -> int:
        if self._open:
            raise LedgerError("a round is already open")
        self._open = True
        return self._rounds_done + 1

    def end_round(self) -> None:
        if not self._open:
            raise LedgerError("no round to end")
        self._open = False
        self._rounds_done += 1

    @contextmanager
    def round(self):
        self.begin_round()
        try:
            yield self
        finally:
            self.end_round()

    def charge(self, j: int, t: int) -> None:
        if not self._open:
            raise LedgerError("measurements require an open round")
        if t < 0:
            raise ValueError("charge must be >= 0")
        if not 0 <= j < self._per_column.size:
            raise ValueError("column index out of range")
        if t:
            with self._lock:
                self._per_column[j] += t

    def count(self, j: int) -> int:
        return int(self._per_column[j])

    def per_column(self) -> list[int]:
        return [int(t) for t in self._per_column]

    def total(self) -> int:
        return int(self._per_column.sum())

    def snapshot(self) -> dict:
        return {
            "per_column": self.per_column(),
            "total": self.total(),
            "rounds": self.rounds,
        }


class ColumnHandle:
    """Measure-only view of one hidden column, optionally shifted.

    With shift ``v``, queries apply to ``A_j - v``: the caller knows ``v``
    already, so subtracting it is free information, but every routed query is
    still charged one measurement.  Shifting an already shifted handle by
    ``w`` composes to shift ``v + w``.
    """

    def __init__(self, matrix: SignalMatrix, j: int, ledger: MeasurementLedger,
                 shift: np.ndarray | None = None):
        if not 0 <= j < matrix.m:
            raise ValueError("column index out of range")
        if shift is not None:
            shift = np.asarray(shift, dtype=np.float64).ravel()
            if shift.size != matrix.n:
                raise ValueError("shift dimension mismatch")
            if not np.all(np.isfinite(shift)):
                raise ValueError("shift contains non-finite entries")
        self._matrix = matrix
        self._j = j
        self._ledger = ledger
        self._shift = shift

    @property
    def column(self) -> int:
        return self._j

    @property
    def n(self) -> int:
        return self._matrix.n

    @property
    def ledger(self) -> MeasurementLedger:
        return self._ledger

    def _residual(self) -> np.ndarray:
        col = self._matrix.values[:, self._j]
        if self._shift is None:
            return col.copy()
        return col - self._shift

    def measure(self, a) -> float:
        """Return a . (A_j - shift) and charge one measurement."""
        a = np.asarray(a, dtype=np.float64).ravel()
        if a.size != self.n:
            raise ValueError("sensing vector dimension mismatch")
        if not np.all(np.isfinite(a)):
            raise ValueError("sensing vector has non-finite entries")
        self._ledger.charge(self._j, 1)
        return float(a @ self._residual())

    def measure_batch(self, sensing) -> np.ndarray:
        """Apply a t-by-n sensing matrix; equivalent to t measure() calls."""
        s = np.asarray(sensing, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != self.n:
            raise ValueError("sensing matrix must be t x n")
        if not np.all(np.isfinite(s)):
            raise ValueError("sensing matrix has non-finite entries")
        if s.shape[0] == 0:
            if not self._ledger.round_open:
                raise LedgerError("measurements require an open round")
            return np.zeros(0)
        self._ledger.charge(self._j, s.shape[0])
        return s @ self._residual()

    def shifted(self, v) -> "ColumnHandle":
        """Handle measuring A_j - (shift + v), sharing the same ledger."""
        v = np.asarray(v, dtype=np.float64).ravel()
        if v.size != self.n:
            raise ValueError("shift dimension mismatch")
        new_shift = v if self._shift is None else self._shift + v
        return ColumnHandle(self._matrix, self._j, self._ledger, new_shift)

    def read_exact(self, charge: int) -> np.ndarray:
        """Sealed capability: the current residual, charged at ``charge``.

        Used only by the idealized recovery mode, which pays the closed-form
        measurement cost instead of routing a sketch through measure().
        Algorithm code must not call this.
        """
        self._ledger.charge(self._j, int(charge))
        return self._residual()


class MeasurementOracle:
    """Owns the hidden matrix and the shared ledger; hands out column handles.

    ``matrix`` is exposed for report building and tests only.
    """

    def __init__(self, matrix):
        self.matrix = as_signal_matrix(matrix)
        self.ledger = MeasurementLedger(self.matrix.m)

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def m(self) -> int:
        return self.matrix.m

    def handle(self, j: int) -> ColumnHandle:
        return ColumnHandle(self.matrix, j, self.ledger)

    def handles(self) -> list[ColumnHandle]:
        return [self.handle(j) for j in range(self.m)]
