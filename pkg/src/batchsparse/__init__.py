"""Batch sparse recovery from counted, adaptively chosen linear measurements."""

from .batch import (
    BucketState,
    HalvingState,
    RecoveryReport,
    batch_recover_const,
    batch_recover_eps,
    expected_const_charges,
    expected_total_const,
    expected_total_eps,
    halving_iterations,
    ledger_matches_formula,
    measurement_bound_check,
)
from .core import (
    SignalMatrix,
    SparseMatrix,
    SparseVector,
    TailError,
    agrees,
    column_residual_l1,
    l1_norm,
    matrix_l1_error,
    matrix_sub,
    optimal_tail_error,
    sparse_add,
    truncate_top_s,
)
from .estimators import BatchSparseRecovery
from .generators import generate_instance, planted_instance, powerlaw_instance
from .lowerbound import (
    AdversarialInstance,
    NonAdaptiveScheme,
    adaptive_baseline_trial,
    gen_adversarial,
    lowerbound_experiment,
    run_nonadaptive_trial,
)
from .matrixio import load_matrix, save_matrix
from .measurement import ColumnHandle, LedgerError, MeasurementLedger, MeasurementOracle
from .primitives import (
    NormEstimate,
    RecoveryConfig,
    estimate_l1,
    idealized_recovery_cost,
    noise_capped_recover,
    noise_capped_recover_matrix,
    norm_sketch_rows,
    sparse_recover,
    two_round_exact_recover,
)

__version__ = "0.1.0"

__all__ = [
    "AdversarialInstance",
    "BatchSparseRecovery",
    "BucketState",
    "ColumnHandle",
    "HalvingState",
    "LedgerError",
    "MeasurementLedger",
    "MeasurementOracle",
    "NonAdaptiveScheme",
    "NormEstimate",
    "RecoveryConfig",
    "RecoveryReport",
    "SignalMatrix",
    "SparseMatrix",
    "SparseVector",
    "TailError",
    "adaptive_baseline_trial",
    "agrees",
    "batch_recover_const",
    "batch_recover_eps",
    "column_residual_l1",
    "estimate_l1",
    "expected_const_charges",
    "expected_total_const",
    "expected_total_eps",
    "gen_adversarial",
    "generate_instance",
    "halving_iterations",
    "idealized_recovery_cost",
    "l1_norm",
    "ledger_matches_formula",
    "load_matrix",
    "lowerbound_experiment",
    "matrix_l1_error",
    "matrix_sub",
    "measurement_bound_check",
    "noise_capped_recover",
    "noise_capped_recover_matrix",
    "norm_sketch_rows",
    "optimal_tail_error",
    "planted_instance",
    "powerlaw_instance",
    "run_nonadaptive_trial",
    "save_matrix",
    "sparse_add",
    "sparse_recover",
    "truncate_top_s",
    "two_round_exact_recover",
]
