"""Synthetic instance families for benchmarks and tests."""

from __future__ import annotations

import numpy as np

from .core import SignalMatrix
from .lowerbound import gen_adversarial

_GEN_PURPOSE = 11


def _rng(seed: int, kind: int) -> np.random.Generator:
    entropy = int(seed) & 0xFFFFFFFFFFFFFFFF
    ss = np.random.SeedSequence(entropy=entropy, spawn_key=(_GEN_PURPOSE, kind))
    return np.random.Generator(np.random.Philox(ss))


def planted_instance(n: int, m: int, k: int, noise: float, seed: int) -> SignalMatrix:
    """km planted entries of magnitude in [1, 2] plus a uniform tail.

    The tail spreads total mass ``noise`` evenly (with random signs) over the
    remaining cells, each strictly below magnitude 1, so the best km-sparse
    tail error is exactly ``noise``.
    """
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    cells = n * m
    support = k * m
    tail_cells = cells - support
    if tail_cells == 0 and noise > 0:
        raise ValueError("no room for tail mass: k * m equals n * m")
    if tail_cells and noise / tail_cells >= 1.0:
        raise ValueError("tail mass too large: per-cell tail magnitude would reach 1")

    rng = _rng(seed, 1)
    flat = np.zeros(cells)
    chosen = rng.choice(cells, size=support, replace=False)
    signs = rng.integers(0, 2, size=support) * 2.0 - 1.0
    flat[chosen] = signs * rng.uniform(1.0, 2.0, size=support)
    if noise > 0 and tail_cells:
        tail_idx = np.setdiff1d(np.arange(cells), chosen, assume_unique=False)
        tail_signs = rng.integers(0, 2, size=tail_cells) * 2.0 - 1.0
        flat[tail_idx] = tail_signs * (noise / tail_cells)
    return SignalMatrix(flat.reshape(n, m))


def powerlaw_instance(n: int, m: int, k: int, seed: int) -> SignalMatrix:
    """Columns with skewed sparsity averaging k, magnitudes decaying as
    rank^(-1.2) within each column, placed at random rows with random signs."""
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = _rng(seed, 2)
    weights = 1.0 / (np.arange(m) + 1.0)
    rng.shuffle(weights)
    counts = np.rint(k * m * weights / weights.sum()).astype(int)
    counts = np.clip(counts, 0, n)
    values = np.zeros((n, m))
    for j in range(m):
        s = int(counts[j])
        if s == 0:
            continue
        rows = rng.choice(n, size=s, replace=False)
        mags = (np.arange(s) + 1.0) ** -1.2
        signs = rng.integers(0, 2, size=s) * 2.0 - 1.0
        values[rows, j] = signs * mags
    return SignalMatrix(values)


def generate_instance(kind: str, n: int, m: int, k: int, noise: float, seed: int) -> SignalMatrix:
    if kind == "planted":
        return planted_instance(n, m, k, noise, seed)
    if kind == "powerlaw":
        return powerlaw_instance(n, m, k, seed)
    if kind == "adversarial":
        return gen_adversarial(n, m, seed).matrix
    raise ValueError(f"unknown instance kind {kind!r}")
