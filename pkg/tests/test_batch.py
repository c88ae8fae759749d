import math

import numpy as np
import pytest

from batchsparse import (
    MeasurementOracle,
    RecoveryConfig,
    batch_recover_const,
    batch_recover_eps,
    expected_const_charges,
    expected_total_const,
    expected_total_eps,
    halving_iterations,
    ledger_matches_formula,
    measurement_bound_check,
    optimal_tail_error,
    truncate_top_s,
)
from batchsparse.batch import BucketState, expected_active
from batchsparse.generators import planted_instance

IDEAL = RecoveryConfig(mode="idealized", seed=0)


def run_const(matrix, k, cfg=IDEAL):
    oracle = MeasurementOracle(matrix)
    return oracle, *batch_recover_const(oracle, k, cfg)


@pytest.mark.parametrize("m", [3, 8, 13, 64])
def test_halving_invariant_each_iteration(m):
    matrix = planted_instance(32, m, 1, 0.5, seed=m)
    _, _, report = run_const(matrix, 1)
    history = report.details["active_history"]
    assert len(history) == halving_iterations(m)
    for ell, size in enumerate(history, start=1):
        assert size == math.ceil(m / 2 ** (ell - 1))
        assert size == expected_active(m, ell)


@pytest.mark.parametrize("m", [1, 3, 8, 13, 64])
def test_fixed_sets_partition_columns(m):
    matrix = planted_instance(16, m, 1, 0.25, seed=m + 100)
    _, _, report = run_const(matrix, 1)
    fixed_sets = [it["fixed"] for it in report.details["iterations"]]
    seen = [j for chunk in fixed_sets for j in chunk]
    assert sorted(seen) == list(range(m))
    assert len(seen) == len(set(seen))


@pytest.mark.parametrize("m", [3, 8, 13])
def test_selection_matches_sort_oracle(m):
    matrix = planted_instance(16, m, 1, 1.0, seed=m + 7)
    _, _, report = run_const(matrix, 1)
    for it in report.details["iterations"]:
        rho = it["rho"]
        want_count = len(it["fixed"])
        oracle_order = sorted(it["active"], key=lambda j: (rho[j], j))
        assert it["fixed"] == oracle_order[:want_count]


@pytest.mark.parametrize("m", [1, 3, 8, 13, 64])
def test_round_count_exact(m):
    matrix = planted_instance(16, m, 1, 0.5, seed=m)
    oracle, _, report = run_const(matrix, 1)
    assert report.rounds == oracle.ledger.rounds == halving_iterations(m)


def test_output_is_km_sparse():
    rng = np.random.default_rng(0)
    for trial in range(25):
        n = int(rng.integers(4, 64))
        m = int(rng.integers(1, 12))
        k = int(rng.integers(1, min(n, 4) + 1))
        matrix = rng.normal(size=(n, m))
        mode = "sketch" if trial % 5 == 0 else "idealized"
        cfg = RecoveryConfig(mode=mode, seed=trial)
        _, estimate, _ = run_const(matrix, k, cfg)
        assert estimate.nnz() <= k * m


def test_zero_matrix_recovers_zero():
    oracle, estimate, report = run_const(np.zeros((16, 8)), 2)
    assert estimate.nnz() == 0
    assert report.l1_error == 0.0
    assert report.rounds == halving_iterations(8)


def test_exactly_k_sparse_columns_idealized_exact():
    rng = np.random.default_rng(2)
    n, m, k = 32, 8, 2
    dense = np.zeros((n, m))
    for j in range(m):
        dense[rng.choice(n, k, replace=False), j] = rng.normal(size=k) + 2.0
    _, estimate, report = run_const(dense, k)
    np.testing.assert_array_equal(estimate.to_dense(), dense)
    assert report.l1_error == 0.0


def test_ledger_conformance_idealized():
    for n, m, k in [(16, 3, 1), (64, 8, 2), (32, 13, 1)]:
        matrix = planted_instance(n, m, k, 0.5, seed=n + m)
        oracle, _, report = run_const(matrix, k)
        assert ledger_matches_formula(report, IDEAL)
        recover, norm = expected_const_charges(n, m, k, IDEAL)
        assert report.iteration_recover_charges == recover
        assert report.iteration_norm_charges == norm
        assert oracle.ledger.total() == expected_total_const(n, m, k, IDEAL)


def test_per_iteration_recovery_charge_bounded():
    for n, m, k in [(64, 8, 1), (128, 16, 2), (64, 13, 1)]:
        matrix = planted_instance(n, m, k, 1.0, seed=3)
        _, _, report = run_const(matrix, k)
        cap = IDEAL.c_rec * 8 * k * m * math.log2(n)
        for charge in report.iteration_recover_charges:
            assert charge <= cap


def test_report_ratio_and_eps_opt():
    matrix = planted_instance(64, 8, 2, 1.0, seed=5)
    _, _, report = run_const(matrix, 2)
    assert report.eps_opt == pytest.approx(1.0, abs=1e-9)
    assert report.ratio() == pytest.approx(report.l1_error / report.eps_opt)
    assert optimal_tail_error(matrix, 2).eps_opt == report.eps_opt


def test_k_validation():
    oracle = MeasurementOracle(np.ones((4, 2)))
    with pytest.raises(ValueError):
        batch_recover_const(oracle, 0, IDEAL)
    with pytest.raises(ValueError):
        batch_recover_const(oracle, 5, IDEAL)
    with pytest.raises(ValueError):
        batch_recover_eps(oracle, 1, 1.5, IDEAL)


def test_eps_zero_matrix_skip_path():
    oracle = MeasurementOracle(np.zeros((16, 4)))
    estimate, report = batch_recover_eps(oracle, 1, 0.25, IDEAL)
    assert estimate.nnz() == 0
    assert report.l1_error == 0.0
    assert report.details["max_norm"] == 0.0
    assert report.details["bucket_sizes"] == {}
    # the refinement round still opens and closes
    assert report.rounds == halving_iterations(4) + 2


def test_eps_round_count_is_const_plus_two():
    for m in [3, 8, 13]:
        matrix = planted_instance(32, m, 1, 1.0, seed=m)
        oracle = MeasurementOracle(matrix)
        _, report = batch_recover_eps(oracle, 1, 0.25, IDEAL)
        assert report.rounds == halving_iterations(m) + 2


def test_eps_exactly_sparse_unchanged():
    rng = np.random.default_rng(6)
    n, m, k = 32, 4, 2
    dense = np.zeros((n, m))
    flat = rng.choice(n * m, k * m, replace=False)
    dense.flat[flat] = rng.normal(size=k * m) + 3.0
    oracle = MeasurementOracle(dense)
    estimate, report = batch_recover_eps(oracle, k, 0.25, IDEAL)
    np.testing.assert_array_equal(estimate.to_dense(), dense)
    assert report.l1_error == 0.0


def test_eps_refinement_never_hurts_idealized():
    for seed in range(10):
        matrix = planted_instance(64, 8, 2, 1.0, seed=seed)
        oracle = MeasurementOracle(matrix)
        _, report = batch_recover_eps(oracle, 2, 0.25, IDEAL)
        assert report.l1_error <= report.details["error_init"] + 1e-9


def test_eps_ledger_conformance():
    matrix = planted_instance(64, 8, 2, 1.0, seed=11)
    oracle = MeasurementOracle(matrix)
    _, report = batch_recover_eps(oracle, 2, 0.25, IDEAL)
    assert ledger_matches_formula(report, IDEAL)
    assert oracle.ledger.total() == expected_total_eps(report, IDEAL)


def test_eps_report_exposes_truncation():
    matrix = planted_instance(64, 8, 2, 1.0, seed=13)
    oracle = MeasurementOracle(matrix)
    estimate, report = batch_recover_eps(oracle, 2, 0.25, IDEAL)
    trunc = truncate_top_s(estimate, 16)
    assert trunc.nnz() <= 16
    assert report.details["error_truncated"] >= 0.0


def test_bucket_state_boundaries():
    rho = [8.0, 4.0, 3.9, 1.0, 0.0, 8.0e-9]
    state = BucketState.build(rho, m=6, eps=0.25)
    assert state.max_norm == 8.0
    assert state.assignment[0] == 1          # (M/2, M]
    assert state.assignment[1] == 2          # boundary M/2 falls to bucket 2
    assert state.assignment[2] == 2
    assert 4 not in state.assignment         # exact zero is never heavy
    assert 5 not in state.assignment         # below the last bucket
    # bucket membership matches the defining inequality
    for j, i in state.assignment.items():
        assert 2.0 ** -i * 8.0 < rho[j] <= 2.0 ** (1 - i) * 8.0


def test_bucket_state_all_equal():
    state = BucketState.build([2.0, 2.0, 2.0], m=3, eps=0.5)
    assert state.buckets == {1: [0, 1, 2]}
    assert state.heavy == [0, 1, 2]


def test_measurement_bound_check_zero_and_overcharge():
    matrix = planted_instance(64, 8, 1, 0.5, seed=1)
    oracle, _, report = run_const(matrix, 1)
    assert measurement_bound_check(report, 64, 8, 1, None, IDEAL)
    # a fabricated report with one column charged n^2 must fail
    fat = dict(report.ledger)
    fat["total"] = 64 * 64 * 8 * 100
    bad = report.__class__(**{**report.__dict__, "ledger": fat})
    assert not measurement_bound_check(bad, 64, 8, 1, None, IDEAL)
    # an (impossible) zero-measurement report passes trivially
    empty = report.__class__(**{**report.__dict__, "ledger": {"total": 0}})
    assert measurement_bound_check(empty, 64, 8, 1, None, IDEAL)


def test_measurement_bound_check_eps():
    matrix = planted_instance(64, 8, 2, 1.0, seed=4)
    oracle = MeasurementOracle(matrix)
    _, report = batch_recover_eps(oracle, 2, 0.25, IDEAL)
    assert measurement_bound_check(report, 64, 8, 2, 0.25, IDEAL)


def test_sketch_mode_round_counts_match():
    matrix = planted_instance(32, 4, 1, 0.25, seed=9)
    cfg = RecoveryConfig(mode="sketch", seed=9)
    oracle = MeasurementOracle(matrix)
    _, report = batch_recover_eps(oracle, 1, 0.5, cfg)
    assert report.rounds == halving_iterations(4) + 2


def test_const_quality_on_planted_instances():
    # constant-factor guarantee, loose test ceiling
    for seed in range(20):
        matrix = planted_instance(128, 16, 2, 1.0, seed=seed)
        _, _, report = run_const(matrix, 2, RecoveryConfig(seed=seed))
        assert report.eps_opt == pytest.approx(1.0, abs=1e-9)
        assert report.ratio() <= 50.0
