"""Line-oriented text format for signal matrices.

Layout: a header line ``n m``, then a mode line, then the payload.

    n m
    dense
    <n rows of m whitespace-separated reals>

or

    n m
    sparse
    <row col value>     (1-indexed, one triplet per line)

Reals are written with 17 significant digits so that save -> load -> save
round-trips bit for bit.
"""

from __future__ import annotations

import numpy as np

from .core import SignalMatrix, SparseMatrix, as_signal_matrix


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_matrix(path, a, fmt: str = "auto") -> None:
    """Write a SignalMatrix (or array, or SparseMatrix) to ``path``.

    ``fmt`` is "dense", "sparse" or "auto"; auto picks sparse when at most a
    quarter of the entries are nonzero.
    """
    if isinstance(a, SparseMatrix):
        sparse = a
        dense_values = None
        n, m = a.n, a.m
        nnz = a.nnz()
    else:
        mat = as_signal_matrix(a)
        sparse = None
        dense_values = mat.values
        n, m = mat.n, mat.m
        nnz = int(np.count_nonzero(dense_values))
    if fmt not in ("auto", "dense", "sparse"):
        raise ValueError(f"unknown format {fmt!r}")
    if fmt == "auto":
        fmt = "sparse" if nnz * 4 <= n * m else "dense"

    lines = [f"{n} {m}", fmt]
    if fmt == "dense":
        if dense_values is None:
            dense_values = sparse.to_dense()
        for i in range(n):
            lines.append(" ".join(_fmt(v) for v in dense_values[i]))
    else:
        if sparse is None:
            sparse = SparseMatrix.from_dense(dense_values)
        for r, c, v in zip(sparse.rows, sparse.cols, sparse.vals):
            lines.append(f"{r + 1} {c + 1} {_fmt(v)}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_matrix(path) -> SignalMatrix:
    """Parse a matrix file written by :func:`save_matrix`."""
    with open(path, "r", encoding="ascii") as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln]
    if len(lines) < 2:
        raise ValueError(f"{path}: truncated matrix file")
    try:
        n_str, m_str = lines[0].split()
        n, m = int(n_str), int(m_str)
    except ValueError as exc:
        raise ValueError(f"{path}: bad header line {lines[0]!r}") from exc
    if n < 1 or m < 1:
        raise ValueError(f"{path}: dimensions must be >= 1")
    mode = lines[1]
    body = lines[2:]
    if mode == "dense":
        if len(body) != n:
            raise ValueError(f"{path}: expected {n} dense rows, got {len(body)}")
        values = np.empty((n, m))
        for i, ln in enumerate(body):
            parts = ln.split()
            if len(parts) != m:
                raise ValueError(f"{path}: row {i + 1} has {len(parts)} entries, expected {m}")
            values[i] = [float(p) for p in parts]
    elif mode == "sparse":
        values = np.zeros((n, m))
        seen = set()
        for ln in body:
            parts = ln.split()
            if len(parts) != 3:
                raise ValueError(f"{path}: bad triplet line {ln!r}")
            r, c, v = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
            if not (0 <= r < n and 0 <= c < m):
                raise ValueError(f"{path}: triplet index out of range in {ln!r}")
            if (r, c) in seen:
                raise ValueError(f"{path}: duplicate triplet for ({r + 1}, {c + 1})")
            seen.add((r, c))
            values[r, c] = v
    else:
        raise ValueError(f"{path}: unknown mode line {mode!r}")
    return SignalMatrix(values)
