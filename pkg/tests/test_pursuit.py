import csv
import io

import numpy as np
import pytest

from bommp import (BlockPattern, BlockVector, DenseMatrix, PursuitConfig,
                   SupportSet, alpha_beta, block_scores, block_support, bomp,
                   bommp, embed, gen_gaussian_matrix, gen_signal, identify,
                   least_squares_min_norm, oracle_l20, submatrix, substream,
                   trace_to_csv)
from bommp.counterexample import CounterexampleSpec, build, worst_case_signal
from bommp.pursuit import (STOP_ITERATIONS, STOP_RESIDUAL, STOP_STALL,
                           TIE_HIGHEST, TIE_LOWEST)

PAT22 = BlockPattern((2, 2))


def test_config_validation():
    cfg = PursuitConfig(K=3, N=2, max_iterations=10)
    assert cfg.iteration_cap == 3  # capped at K
    assert PursuitConfig(K=3, max_iterations=2).iteration_cap == 2
    with pytest.raises(ValueError):
        PursuitConfig(K=0)
    with pytest.raises(ValueError):
        PursuitConfig(K=2, N=3)
    with pytest.raises(ValueError):
        PursuitConfig(K=1, epsilon=-0.1)
    with pytest.raises(ValueError):
        PursuitConfig(K=1, tie_break="random")
    with pytest.raises(ValueError):
        PursuitConfig(K=1, max_iterations=0)


def test_identify_examples():
    A = DenseMatrix.identity(PAT22)
    assert identify(A, [0, 0, 3, 4], 1).indices == (1,)
    # exact tie, resolved by policy
    assert identify(A, [1, 0, 1, 0], 1, TIE_LOWEST).indices == (0,)
    assert identify(A, [1, 0, 1, 0], 1, TIE_HIGHEST).indices == (1,)
    with pytest.raises(ValueError):
        identify(A, [1, 0, 1, 0], 3)


def test_identify_counterexample_tie():
    spec = CounterexampleSpec(K=2, N=1)
    A = build(spec)
    r = A.values @ worst_case_signal(spec).values
    scores = block_scores(A, r)
    assert np.max(np.abs(scores - 2.0 / 3.0)) < 1e-12
    assert identify(A, r, 1, TIE_HIGHEST).indices == (2,)  # decoy block
    assert identify(A, r, 1, TIE_LOWEST).indices == (0,)


def test_identify_ranking_dominates_excluded():
    rng = np.random.default_rng(3)
    pat = BlockPattern.uniform(6, 2)
    for _ in range(20):
        A = gen_gaussian_matrix(8, pat, rng)
        r = rng.normal(size=8)
        chosen = identify(A, r, 3)
        scores = block_scores(A, r)
        excluded = [i for i in range(pat.l) if i not in chosen]
        assert min(scores[list(chosen.indices)]) >= max(scores[excluded]) - 1e-12


def test_bommp_zero_measurement():
    A = DenseMatrix.identity(PAT22)
    res = bommp(A, np.zeros(4), PursuitConfig(K=2))
    assert res.iterations == 0
    assert res.support.indices == ()
    assert np.array_equal(res.estimate.values, np.zeros(4))
    assert res.stop_reason == STOP_RESIDUAL


def test_bommp_identity_one_block():
    pat = BlockPattern((2, 2, 2))
    A = DenseMatrix.identity(pat)
    x = np.array([0, 0, 5, 6, 0, 0.0])
    res = bommp(A, A.values @ x, PursuitConfig(K=1))
    assert res.iterations == 1
    assert res.support.indices == (1,)
    assert np.allclose(res.estimate.values, x)
    assert res.stop_reason == STOP_RESIDUAL


def test_bommp_dimension_checks():
    A = DenseMatrix.identity(PAT22)
    with pytest.raises(ValueError):
        bommp(A, np.zeros(3), PursuitConfig(K=1))
    small = DenseMatrix(np.ones((2, 4)), PAT22)
    with pytest.raises(ValueError):
        bommp(small, np.zeros(2), PursuitConfig(K=2, N=2))  # N*K > m


def _gaussian_instance(K=2, N=2):
    pat = BlockPattern.uniform(12, 2)
    A = gen_gaussian_matrix(20, pat, substream(2024, 0))
    x = gen_signal(pat, K, substream(2024, 0, 1))
    return A, x


def test_bommp_gaussian_matches_oracle():
    A, x = _gaussian_instance()
    y = A.values @ x.values
    res = bommp(A, y, PursuitConfig(K=2, N=2))
    rel = np.linalg.norm(res.estimate.values - x.values) / np.linalg.norm(x.values)
    assert rel <= 1e-8
    est, sup = oracle_l20(A, y, 0.0, 2)
    assert sup == block_support(res.estimate)
    assert np.allclose(est.values, res.estimate.values,
                       rtol=0, atol=1e-8 * np.linalg.norm(res.estimate.values))


def test_bomp_equals_single_selection():
    A, x = _gaussian_instance()
    y = A.values @ x.values
    a = bomp(A, y, PursuitConfig(K=2, N=2))  # N forced to 1
    b = bommp(A, y, PursuitConfig(K=2, N=1))
    assert a.support == b.support
    assert np.array_equal(a.estimate.values, b.estimate.values)
    rel = np.linalg.norm(a.estimate.values - x.values) / np.linalg.norm(x.values)
    assert rel <= 1e-8


def test_trace_invariants_random():
    rng = np.random.default_rng(77)
    pat = BlockPattern.uniform(8, 2)
    for trial in range(20):
        A = gen_gaussian_matrix(14, pat, substream(505, trial, 0))
        x = gen_signal(pat, 3, substream(505, trial, 1))
        y = A.values @ x.values + 0.01 * rng.normal(size=14)
        cfg = PursuitConfig(K=3, N=2, epsilon=0.0)
        res = bommp(A, y, cfg)
        assert res.stop_reason in (STOP_RESIDUAL, STOP_ITERATIONS, STOP_STALL)
        y_norm = np.linalg.norm(y)
        a_norm = np.linalg.norm(A.values)
        prev_norm = y_norm
        prev_cum = SupportSet.empty(pat)
        for rec in res.trace:
            # support growth: |cum_k| <= N*k and cumulative only grows
            assert rec.cumulative.size <= cfg.N * rec.k
            assert set(prev_cum.indices) <= set(rec.cumulative.indices)
            # monotone residuals
            assert rec.residual_norm <= prev_norm + 1e-12 * y_norm
            # residual orthogonal to every selected column
            _, r, _ = least_squares_min_norm(submatrix(A, rec.cumulative), y)
            assert abs(np.linalg.norm(r) - rec.residual_norm) <= 1e-10 * max(1.0, y_norm)
            assert np.max(np.abs(submatrix(A, rec.cumulative).values.T @ r)) \
                <= 1e-9 * a_norm * y_norm
            prev_norm = rec.residual_norm
            prev_cum = rec.cumulative
        # estimate residual equals the last recorded residual norm
        if res.trace:
            resid = np.linalg.norm(y - A.values @ res.estimate.values)
            last = res.trace[-1].residual_norm
            assert abs(resid - last) <= 1e-10 * max(1.0, last)
        # everything nonzero in the estimate lies inside the selection
        assert set(block_support(res.estimate, 0.0).indices) <= set(res.support.indices)


def test_bommp_stall_on_repeated_support():
    # second block of A is dead and y is outside the column span: the same
    # block gets picked twice with no residual progress
    A = DenseMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]), BlockPattern((1, 1)))
    res = bommp(A, [0.0, 1.0], PursuitConfig(K=2, N=1))
    assert res.stop_reason == STOP_STALL
    assert res.iterations == 2
    assert res.trace[0].cumulative == res.trace[1].cumulative


def test_bommp_stall_when_block_exceeds_rows():
    # single block wider than the row count: the fit would go underdetermined
    A = DenseMatrix(np.ones((2, 3)), BlockPattern.single(3))
    res = bommp(A, [1.0, 2.0], PursuitConfig(K=1))
    assert res.stop_reason == STOP_STALL
    assert res.iterations == 0
    assert res.support.indices == ()


def test_bommp_iteration_cap():
    # one iteration allowed on a two-block signal leaves a residual
    A, x = _gaussian_instance()
    y = A.values @ x.values
    res = bommp(A, y, PursuitConfig(K=2, max_iterations=1))
    assert res.iterations == 1
    assert res.stop_reason == STOP_ITERATIONS


def test_alpha_beta_orthogonal_design():
    pat = BlockPattern((2, 2, 2))
    A = DenseMatrix.identity(pat)
    x = np.array([0, 0, 5, 6, 0, 0.0])
    T = SupportSet((1,), pat)
    alpha, beta = alpha_beta(A, A.values @ x, SupportSet.empty(pat), T, 1)
    assert beta == pytest.approx(np.hypot(5, 6))
    assert alpha == 0.0
    assert beta > alpha


def test_alpha_beta_counterexample_tie():
    spec = CounterexampleSpec(K=2, N=1)
    A = build(spec)
    y = A.values @ worst_case_signal(spec).values
    T = SupportSet((0, 1), spec.pattern)
    alpha, beta = alpha_beta(A, y, SupportSet.empty(spec.pattern), T, 1)
    assert alpha == beta == pytest.approx(2.0 / 3.0, abs=1e-15)


def test_alpha_beta_undefined_cases():
    pat = BlockPattern((2, 2))
    A = DenseMatrix.identity(pat)
    T = SupportSet((0,), pat)
    with pytest.raises(ValueError):
        alpha_beta(A, np.ones(4), SupportSet((0,), pat), T, 1)  # T covered
    with pytest.raises(ValueError):
        alpha_beta(A, np.ones(4), SupportSet.empty(pat), T, 2)  # too few outside


def test_alpha_beta_first_iteration_gaussian():
    A, x = _gaussian_instance()
    y = A.values @ x.values
    T = block_support(x)
    alpha, beta = alpha_beta(A, y, SupportSet.empty(A.pattern), T, 2)
    assert beta > alpha  # consistent with the successful run above


def test_trace_csv_columns_and_indices():
    pat = BlockPattern((2, 2, 2))
    A = DenseMatrix.identity(pat)
    x = np.array([0, 0, 5, 6, 0, 0.0])
    res = bommp(A, A.values @ x, PursuitConfig(K=1))
    buf = io.StringIO()
    trace_to_csv(res, buf, true_support=SupportSet((1,), pat))
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert list(rows[0]) == ["k", "selected_blocks", "cumulative_size",
                             "residual_norm", "alpha_N", "beta_1"]
    assert rows[0]["selected_blocks"] == "2"  # 1-based in text output
    assert rows[0]["cumulative_size"] == "1"
    assert float(rows[0]["beta_1"]) == pytest.approx(np.hypot(5, 6))
    assert float(rows[0]["alpha_N"]) == 0.0


def test_trace_csv_without_true_support(tmp_path):
    A, x = _gaussian_instance()
    res = bommp(A, A.values @ x.values, PursuitConfig(K=2, N=2))
    path = tmp_path / "trace.csv"
    trace_to_csv(res, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["k", "selected_blocks", "cumulative_size", "residual_norm"]
    assert len(rows) == res.iterations
    sel = [int(tok) for tok in rows[0]["selected_blocks"].split(";")]
    assert len(sel) == 2 and all(1 <= s <= 12 for s in sel)


def test_trace_csv_blank_margins_once_covered():
    # after the true support is fully selected the margin columns go blank
    pat = BlockPattern((1, 1, 1))
    A = DenseMatrix.identity(pat)
    x = embed([3.0], SupportSet((0,), pat))
    res = bommp(A, A.values @ x.values + np.array([0, 1e-4, 0]),
                PursuitConfig(K=2, epsilon=0.0))
    assert res.iterations == 2
    buf = io.StringIO()
    trace_to_csv(res, buf, true_support=SupportSet((0,), pat))
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert rows[0]["beta_1"] != ""
    assert rows[1]["alpha_N"] == "" and rows[1]["beta_1"] == ""
