"""Single-column recovery primitives.

Two black boxes used by the batch algorithms, plus two self-contained
schemes built from them:

* ``sparse_recover``  -- stable sparse recovery of one column at sparsity s
  with relative accuracy eps.  Two modes: ``idealized`` reads the true top-s
  entries through the sealed ledger capability and pays the closed-form
  measurement cost, which isolates the batch logic from sketch noise;
  ``sketch`` routes a count-sketch through ordinary measurements and is a
  practical stand-in (any stable sparse recovery scheme would do).
* ``estimate_l1``     -- constant-factor l1 norm estimate from a Cauchy
  projection sketch (medians of 1-stable projections).
* ``noise_capped_recover``   -- doubling scheme: given a target error cap
  instead of a sparsity bound, double s until the residual estimate is small.
* ``two_round_exact_recover`` -- for exactly sparse inputs: round one
  estimates each column's sparsity, round two recovers at twice the estimate.

All randomness is drawn from counter-based generators keyed by
(seed, purpose, column, round), so every draw is reproducible and distinct
columns can be processed independently within a round.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .core import SparseMatrix, SparseVector
from .measurement import ColumnHandle

# Purpose tags for deriving independent random streams.
PURPOSE_NORM = 1
PURPOSE_RECOVER = 2
PURPOSE_SPARSITY = 3

# Inner accuracy of the count-sketch: repetitions per coordinate estimate
# scale as SKETCH_DEPTH_FACTOR * log2(n).
SKETCH_DEPTH_FACTOR = 8


def rng_for(seed: int, purpose: int, column: int, round_id: int, salt: int = 0) -> np.random.Generator:
    """Counter-based generator for the (seed, purpose, column, round) stream."""
    entropy = int(seed) & 0xFFFFFFFFFFFFFFFF
    ss = np.random.SeedSequence(entropy=entropy,
                                spawn_key=(int(purpose), int(column), int(round_id), int(salt)))
    return np.random.Generator(np.random.Philox(ss))


def cauchy_rows(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard Cauchy variates via tan(pi * (u - 1/2)), u uniform on (0, 1)."""
    u = rng.random(shape)
    return np.tan(np.pi * (u - 0.5))


def cost_scale(n: int) -> float:
    """log2(n) cost scale, floored at 1 so n = 1 never yields a zero charge."""
    return math.log2(n) if n >= 2 else 1.0


def idealized_recovery_cost(s: int, eps: float, n: int, c_rec: float) -> int:
    """Closed-form measurement charge for one idealized recovery call.

    ceil(c_rec * eps^(-1/2) * max(1, ln^3(1/eps)) * s * log2(n)), floored at 1.
    The bound checker recomputes exactly this, so implementation and check
    share one definition.
    """
    poly = max(1.0, math.log(1.0 / eps) ** 3)
    return max(1, math.ceil(c_rec * eps ** -0.5 * poly * s * cost_scale(n)))


def norm_sketch_rows(n: int, c_norm: float) -> int:
    """Row count of the l1 norm sketch: ceil(c_norm * log2(n)), at least 1."""
    return max(1, math.ceil(c_norm * cost_scale(n)))


@dataclasses.dataclass
class RecoveryConfig:
    """Knobs shared by all recovery primitives.

    mode         -- "idealized" or "sketch" (affects sparse_recover and the
                    sparsity estimator; the norm sketch is always real).
    c_rec        -- constant in the idealized recovery charge formula.
    eps_default  -- accuracy used where the caller does not pass one.
    c_norm       -- constant in the norm-sketch row count.
    seed         -- master seed; all randomness derives from it.
    """

    mode: str = "idealized"
    c_rec: float = 1.0
    eps_default: float = 0.5
    c_norm: float = 16.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("idealized", "sketch"):
            raise ValueError(f"mode must be 'idealized' or 'sketch', got {self.mode!r}")
        if self.c_rec <= 0 or self.c_norm <= 0:
            raise ValueError("cost constants must be positive")
        if not 0.0 < self.eps_default < 1.0:
            raise ValueError("eps_default must lie in (0, 1)")
        self.seed = int(self.seed)


@dataclasses.dataclass(frozen=True)
class NormEstimate:
    rho: float

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho >= 0):
            raise ValueError("rho must be finite and >= 0")


def estimate_l1(handle: ColumnHandle, cfg: RecoveryConfig, salt: int = 0) -> NormEstimate:
    """Estimate the l1 norm of the handle's residual within a factor of 2.

    Measures ceil(c_norm * log2 n) i.i.d. Cauchy rows and returns the median
    of the absolute measurements; the median of |Cauchy| is 1, so no
    rescaling is needed.  The factor-2 guarantee holds with probability
    1 - n^(-Omega(1)); one estimate per (column, round) is the supported
    pattern, ``salt`` gives extra independent estimates when needed.
    """
    r = norm_sketch_rows(handle.n, cfg.c_norm)
    rng = rng_for(cfg.seed, PURPOSE_NORM, handle.column, handle.ledger.open_round_id, salt)
    sensing = cauchy_rows(rng, (r, handle.n))
    y = handle.measure_batch(sensing)
    return NormEstimate(float(np.median(np.abs(y))))


def _top_entries(x: np.ndarray, s: int) -> SparseVector:
    """Best s-sparse truncation of x; magnitude ties keep the smaller index."""
    n = x.size
    order = np.lexsort((np.arange(n), -np.abs(x)))
    keep = order[:s]
    keep = keep[x[keep] != 0.0]
    return SparseVector(n, keep, x[keep])


def sparse_recover(handle: ColumnHandle, s: int, eps: float, cfg: RecoveryConfig) -> SparseVector:
    """Recover an s-sparse estimate of the handle's residual.

    Output has at most s nonzeros and agrees with the residual (returned
    values equal true values; in sketch mode the selected coordinates are
    probed directly, charged, to realize this).  Idealized mode returns the
    exact top-s truncation, so its error equals the best s-sparse error;
    sketch mode carries a constant-factor guarantee with high probability.
    Charges the closed-form cost (idealized) or the actual sketch row count.
    """
    if int(s) < 1:
        raise ValueError("sparsity budget must be >= 1")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    n = handle.n
    s_eff = min(int(s), n)

    if cfg.mode == "idealized":
        charge = idealized_recovery_cost(s_eff, eps, n, cfg.c_rec)
        x = handle.read_exact(charge)
        return _top_entries(x, s_eff)

    # Count-sketch point queries: depth repetitions of width-w bucketed sign
    # measurements, median estimate per coordinate, keep the top s.  Width
    # 2s+1 keeps the heavy coordinates isolated often enough; width exactly s
    # degenerates at s = 1.  When the sketch would cost at least n rows,
    # reading the column directly is cheaper and exact.
    depth = max(1, math.ceil(SKETCH_DEPTH_FACTOR * cost_scale(n)))
    width = 2 * s_eff + 1
    if width * depth + s_eff >= n:
        y = handle.measure_batch(np.eye(n))
        return _top_entries(y, s_eff)

    rng = rng_for(cfg.seed, PURPOSE_RECOVER, handle.column, handle.ledger.open_round_id)
    per_rep = np.empty((depth, n))
    coords = np.arange(n)
    for rep in range(depth):
        buckets = rng.integers(0, width, size=n)
        signs = rng.integers(0, 2, size=n) * 2.0 - 1.0
        sensing = np.zeros((width, n))
        sensing[buckets, coords] = signs
        y = handle.measure_batch(sensing)
        per_rep[rep] = signs * y[buckets]
    estimates = np.median(per_rep, axis=0)

    order = np.lexsort((coords, -np.abs(estimates)))
    support = np.sort(order[:s_eff])
    probes = np.zeros((support.size, n))
    probes[np.arange(support.size), support] = 1.0
    values = handle.measure_batch(probes)
    keep = values != 0.0
    return SparseVector(n, support[keep], values[keep])


def noise_capped_recover(handle: ColumnHandle, eps_cap: float, cfg: RecoveryConfig) -> SparseVector:
    """Recover the residual to within O(eps_cap) l1 error via doubling.

    For s = 1, 2, 4, ... (capped at n), each doubling step runs in its own
    adaptive round: recover at sparsity s with eps = 1/2, then estimate the
    leftover norm; stop once the estimate is at most 2 * eps_cap.  At s = n
    recovery is exact, so the loop always halts.  With the factor-2 norm
    estimator and factor-(1 + 1/2) recovery, the returned error is at most
    6 * eps_cap.  Begins and ends its own rounds; call with no round open.
    """
    if not eps_cap > 0:
        raise ValueError("eps_cap must be positive")
    ledger = handle.ledger
    s = 1
    while True:
        ledger.begin_round()
        estimate = sparse_recover(handle, s, 0.5, cfg)
        rho = estimate_l1(handle.shifted(estimate.to_dense()), cfg).rho
        ledger.end_round()
        if rho <= 2.0 * eps_cap or s >= handle.n:
            return estimate
        s = min(2 * s, handle.n)


def noise_capped_recover_matrix(oracle, eps_cap: float, cfg: RecoveryConfig) -> SparseMatrix:
    """Run the doubling scheme on every column in lockstep.

    Columns share rounds (one round per doubling step); each column drops out
    as soon as its residual estimate clears the cap, so the round count is
    driven by the densest column instead of summing over columns.
    """
    if not eps_cap > 0:
        raise ValueError("eps_cap must be positive")
    handles = oracle.handles()
    ledger = oracle.ledger
    n = oracle.n
    active = list(range(oracle.m))
    done: dict[int, SparseVector] = {}
    s = 1
    while active:
        ledger.begin_round()
        finished = []
        for j in active:
            estimate = sparse_recover(handles[j], s, 0.5, cfg)
            rho = estimate_l1(handles[j].shifted(estimate.to_dense()), cfg).rho
            if rho <= 2.0 * eps_cap or s >= n:
                done[j] = estimate
                finished.append(j)
        ledger.end_round()
        active = [j for j in active if j not in finished]
        s = min(2 * s, n)
    return SparseMatrix.from_columns(n, oracle.m, done)


def _sparsity_estimate(handle: ColumnHandle, cfg: RecoveryConfig) -> int:
    """Constant-factor estimate of the residual's nonzero count.

    Idealized mode charges the norm-sketch row count and returns the exact
    count (standing in for a dedicated support-size sketch).  Sketch mode is
    a heuristic distinct-count: probe geometrically subsampled coordinate
    sets with Gaussian weights and find the sampling rate where roughly half
    the probes miss the support.
    """
    n = handle.n
    if cfg.mode == "idealized":
        x = handle.read_exact(norm_sketch_rows(n, cfg.c_norm))
        return int(np.count_nonzero(x))

    rng = rng_for(cfg.seed, PURPOSE_SPARSITY, handle.column, handle.ledger.open_round_id)
    reps = max(2, math.ceil(cfg.c_norm / 2))
    levels = int(math.ceil(cost_scale(n))) + 1
    hit_rate = np.zeros(levels)
    for level in range(levels):
        rate = 2.0 ** -level
        sensing = rng.standard_normal((reps, n)) * (rng.random((reps, n)) < rate)
        y = handle.measure_batch(sensing)
        hit_rate[level] = np.mean(np.abs(y) > 0.0)
    if hit_rate[0] == 0.0:
        return 0
    for level in range(levels):
        if hit_rate[level] <= 0.5:
            return max(1, round(math.log(2.0) * 2 ** level))
    return n


def two_round_exact_recover(handles, cfg: RecoveryConfig) -> tuple[SparseMatrix, list[int]]:
    """Recover an exactly sparse matrix in two adaptive rounds.

    Round one estimates each column's sparsity; round two recovers each
    column at twice its estimate.  Exact whenever the estimates are valid
    upper bounds after doubling (always, in idealized mode).  Intended for
    noiseless inputs; on noisy ones it is best effort.  Returns the estimate
    and the per-column sparsity estimates.  Owns its two rounds.
    """
    handles = list(handles)
    if not handles:
        raise ValueError("need at least one column handle")
    ledger = handles[0].ledger
    n = handles[0].n

    with ledger.round():
        counts = [_sparsity_estimate(h, cfg) for h in handles]

    columns: dict[int, SparseVector] = {}
    with ledger.round():
        for j, (h, est) in enumerate(zip(handles, counts)):
            if est == 0:
                continue
            budget = min(n, 2 * est)
            columns[j] = sparse_recover(h, budget, cfg.eps_default, cfg)
    return SparseMatrix.from_columns(n, len(handles), columns), counts
