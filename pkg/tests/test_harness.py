import json
import math

import numpy as np
import pytest

from bommp import (BlockPattern, BlockVector, DenseMatrix, ExperimentConfig,
                   SupportSet, block_norms, block_support, embed,
                   gen_gaussian_matrix, gen_noise, gen_signal, oracle_l20,
                   phase_csv, run_phase, run_trial, substream, write_phase_csv,
                   write_phase_svg)
from bommp.harness import PHASE_CSV_COLUMNS, SIGNAL_CONSTANT_MAGNITUDE
from bommp.ric import EnumerationBudgetError

PAT222 = BlockPattern((2, 2, 2))


def test_substream_determinism_and_separation():
    a = substream(42, 1, 2).normal(size=8)
    b = substream(42, 1, 2).normal(size=8)
    assert np.array_equal(a, b)
    c = substream(42, 1, 3).normal(size=8)
    d = substream(43, 1, 2).normal(size=8)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_gen_gaussian_matrix_deterministic():
    pat = BlockPattern.uniform(3, 2)
    A = gen_gaussian_matrix(5, pat, substream(9, 0))
    B = gen_gaussian_matrix(5, pat, substream(9, 0))
    assert np.array_equal(A.values, B.values)
    C = gen_gaussian_matrix(5, pat, substream(9, 1))
    assert np.mean(A.values != C.values) >= 0.99


def test_gen_gaussian_matrix_column_normalization():
    # entries are N(0, 1/m), so column squared norms concentrate around 1
    pat = BlockPattern.uniform(10_000, 1)
    A = gen_gaussian_matrix(50, pat, substream(9, 2))
    mean_sq = float(np.mean(np.sum(A.values ** 2, axis=0)))
    assert abs(mean_sq - 1.0) < 0.05


def test_gen_signal_edge_cases():
    assert np.array_equal(gen_signal(PAT222, 0, substream(1, 0)).values, np.zeros(6))
    full = gen_signal(PAT222, 3, substream(1, 1))
    assert block_support(full, 0.0).size == 3
    with pytest.raises(ValueError):
        gen_signal(PAT222, 4, substream(1, 2))
    const = gen_signal(PAT222, 2, substream(1, 3), SIGNAL_CONSTANT_MAGNITUDE)
    norms = block_norms(const)
    assert np.allclose(norms[norms > 0], 1.0)


def test_gen_signal_support_uniformity():
    # inclusion frequency of each block is K/l within 3 binomial sigmas
    l, K, draws = 6, 2, 10_000
    pat = BlockPattern.uniform(l, 2)
    counts = np.zeros(l)
    for t in range(draws):
        counts[list(block_support(gen_signal(pat, K, substream(55, t)), 0.0))] += 1
    p = K / l
    sigma = math.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) <= 3 * sigma)


def test_gen_noise():
    assert np.array_equal(gen_noise(5, 0.0, substream(2, 0)), np.zeros(5))
    e = gen_noise(5, 0.3, substream(2, 1))
    assert abs(np.linalg.norm(e) - 0.3) <= 1e-12
    f = gen_noise(5, 0.3, substream(2, 2))
    cos = abs(e @ f) / (np.linalg.norm(e) * np.linalg.norm(f))
    assert cos < 1.0 - 1e-12  # independent directions
    with pytest.raises(ValueError):
        gen_noise(5, -0.1, substream(2, 3))


def test_oracle_trivial_cases():
    A = DenseMatrix.identity(PAT222)
    est, sup = oracle_l20(A, np.zeros(6), 0.0, 2)
    assert sup.indices == () and np.array_equal(est.values, np.zeros(6))
    est, sup = oracle_l20(A, [0, 0, 5, 6, 0, 0], 0.0, 2)
    assert sup.indices == (1,)
    assert np.array_equal(est.values, [0, 0, 5, 6, 0, 0])


def test_oracle_infeasible_returns_none():
    A = DenseMatrix.identity(PAT222)
    assert oracle_l20(A, [1, 0, 0, 0, 0, 0], 0.0, 0) is None


def test_oracle_budget():
    pat = BlockPattern.uniform(6, 1)
    A = DenseMatrix.identity(pat)
    with pytest.raises(EnumerationBudgetError):
        oracle_l20(A, np.zeros(6), 0.0, 3, budget=5)


def test_oracle_prefers_sparsest_then_smallest_residual():
    # a 1-block description exists, so the 2-block ones must not win
    pat = BlockPattern((1, 1, 1))
    A = DenseMatrix(np.array([[1.0, 1.0, 0.0],
                              [0.0, 0.0, 1.0],
                              [0.0, 0.0, 0.0]]), pat)
    est, sup = oracle_l20(A, [2.0, 0.0, 0.0], 0.0, 2)
    assert sup.size == 1
    assert sup.indices == (0,)  # lexicographically first among the tied pair


def _tiny_config(**kw):
    base = dict(m=8, lengths=(2, 2, 2, 2), K_values=(1,), N_values=(1,),
                trials=2, master_seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        _tiny_config(K_values=(5,))  # more blocks than exist
    with pytest.raises(ValueError):
        _tiny_config(trials=0)
    with pytest.raises(ValueError):
        _tiny_config(N_values=())
    with pytest.raises(ValueError):
        _tiny_config(noise_epsilon=-1.0)
    with pytest.raises(ValueError):
        _tiny_config(matrix_ensemble="bernoulli")


def test_config_from_dict_forms():
    cfg = ExperimentConfig.from_dict({
        "m": 8, "blocks": 4, "block_length": 2,
        "K_values": [1, 2], "N_values": [1], "trials": 3})
    assert cfg.lengths == (2, 2, 2, 2)
    same = ExperimentConfig.from_json(json.dumps(
        {"m": 8, "lengths": [2, 2, 2, 2], "K_values": [1, 2], "N_values": [1],
         "trials": 3}))
    assert same == cfg
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"m": 8, "blocks": 4, "block_length": 2,
                                    "K_values": [1], "N_values": [1],
                                    "trials": 3, "typo_key": 1})
    round_trip = ExperimentConfig.from_dict(cfg.to_dict())
    assert round_trip == cfg


def test_run_trial_zero_signal():
    cfg = _tiny_config()
    A = gen_gaussian_matrix(8, cfg.pattern, substream(3, 0))
    out = run_trial(A, BlockVector.zeros(cfg.pattern), cfg, K=0, N=1)
    assert out.exact_recovery
    assert out.iterations == 0
    assert out.relative_error == 0.0


def test_run_trial_identity_design():
    cfg = _tiny_config()
    A = DenseMatrix.identity(cfg.pattern)
    for t in range(5):
        x = gen_signal(cfg.pattern, 1, substream(3, 10, t))
        out = run_trial(A, x, cfg, K=1, N=1, trial=t)
        assert out.exact_recovery
        assert out.relative_error <= 1e-12


def test_run_trial_noisy_success_is_support_match():
    cfg = _tiny_config(noise_epsilon=1e-6)
    A = DenseMatrix.identity(cfg.pattern)
    x = embed([3.0, 4.0], SupportSet((2,), cfg.pattern))
    out = run_trial(A, x, cfg, K=1, N=1)
    assert out.exact_recovery
    assert 0.0 < out.relative_error < 1e-5  # noise floor, not exact


def test_run_phase_deterministic_across_workers(tmp_path):
    cfg = _tiny_config(K_values=(0, 1, 2), trials=1)
    rows1 = run_phase(cfg, workers=1)
    rows2 = run_phase(cfg, workers=2)
    assert phase_csv(rows1) == phase_csv(rows2)
    again = run_phase(cfg, workers=1)
    assert phase_csv(rows1) == phase_csv(again)
    by_k = {r["K"]: r for r in rows1}
    assert by_k[0]["success_rate"] == 1.0  # zero signal is always recovered
    csv_path = tmp_path / "sweep.csv"
    write_phase_csv(rows1, csv_path)
    text = csv_path.read_text()
    assert text.splitlines()[0] == ",".join(PHASE_CSV_COLUMNS)
    assert text == phase_csv(rows1)


def test_run_phase_row_order_and_fields():
    cfg = _tiny_config(K_values=(2, 1), N_values=(1,), trials=1)
    rows = run_phase(cfg)
    assert [r["K"] for r in rows] == [2, 1]  # grid order as configured
    for r in rows:
        assert set(r) == set(PHASE_CSV_COLUMNS)
        assert r["trials"] == 1
        assert 0.0 <= r["success_rate"] <= 1.0


def test_phase_svg_reproducible(tmp_path):
    cfg = _tiny_config(K_values=(1, 2), N_values=(1,), trials=1)
    rows = run_phase(cfg)
    p1 = tmp_path / "a.svg"
    p2 = tmp_path / "b.svg"
    write_phase_svg(rows, p1)
    write_phase_svg(rows, p2)
    data = p1.read_bytes()
    assert data == p2.read_bytes()
    assert data.lstrip().startswith(b"<?xml")
