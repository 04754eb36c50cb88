"""Regularized precoder construction, normalization, and sum rate."""
import numpy as np
import pytest

from dcsi_sim.errors import (DegeneratePrecoderError, NumericalDomainError,
                             StructuralError)
from dcsi_sim.precoding import (PrecoderBlock, assemble,
                                rates_from_cross_gains, rzf_block,
                                rzf_directions, sum_rate)
from dcsi_sim.scenario import build_default_scenario
from dcsi_sim.stochastics import complex_normal


def _rand_estimate(gen, m=8, k=5):
    return complex_normal(gen, (m, k))


def test_rzf_defining_system_residual():
    gen = np.random.default_rng(0)
    sc = build_default_scenario()
    for _ in range(50):
        hh = _rand_estimate(gen)
        alphas = gen.uniform(0.0, 1.0, 7)
        f, valid = rzf_directions(hh, alphas)
        assert valid.all()
        gram = hh.conj().T @ hh
        for a, alpha in enumerate(alphas):
            mat = (1 - alpha) * gram + alpha * np.eye(5)
            np.testing.assert_allclose(f[a] @ mat, hh, atol=1e-9)


def test_rzf_full_regularization_is_matched_filter():
    gen = np.random.default_rng(1)
    hh = _rand_estimate(gen)
    f, valid = rzf_directions(hh, np.array([1.0]))
    assert valid.all()
    np.testing.assert_allclose(f[0], hh, atol=1e-12)


def test_rzf_zero_regularization_inverts_the_gram():
    gen = np.random.default_rng(2)
    hh = _rand_estimate(gen)  # K=5 <= M=8, full column rank a.s.
    f, valid = rzf_directions(hh, np.array([0.0]))
    assert valid.all()
    np.testing.assert_allclose(hh.conj().T @ f[0], np.eye(5), atol=1e-9)


def test_rzf_block_power_and_rows():
    gen = np.random.default_rng(3)
    sc = build_default_scenario()
    hh = _rand_estimate(gen)
    for n in range(2):
        blk = rzf_block(hh, 0.3, n, sc)
        assert blk.matrix.shape == (4, 5)
        assert np.linalg.norm(blk.matrix) ** 2 == pytest.approx(
            sc.power_budgets[n], rel=1e-12)
        # block rows are collinear with the same rows of the full solution
        f, _ = rzf_directions(hh, np.array([0.3]))
        rows = f[0][sc.row_slice(n), :]
        scale = np.sqrt(sc.power_budgets[n]) / np.linalg.norm(rows)
        np.testing.assert_allclose(blk.matrix, scale * rows, atol=1e-12)


def test_rzf_block_rejects_bad_inputs():
    gen = np.random.default_rng(4)
    sc = build_default_scenario()
    hh = _rand_estimate(gen)
    with pytest.raises(NumericalDomainError):
        rzf_block(hh, -0.1, 0, sc)
    with pytest.raises(NumericalDomainError):
        rzf_block(hh, 1.1, 0, sc)
    with pytest.raises(StructuralError):
        rzf_block(hh[:4], 0.5, 0, sc)
    with pytest.raises(DegeneratePrecoderError):
        rzf_block(np.zeros((8, 5), dtype=complex), 0.5, 0, sc)


def test_assemble_stacks_blocks_in_tx_order():
    gen = np.random.default_rng(5)
    sc = build_default_scenario()
    hh = _rand_estimate(gen)
    b0 = rzf_block(hh, 0.2, 0, sc)
    b1 = rzf_block(hh, 0.7, 1, sc)
    wp = assemble([b1, b0])  # order on input must not matter
    np.testing.assert_allclose(wp.matrix[:4], b0.matrix)
    np.testing.assert_allclose(wp.matrix[4:], b1.matrix)
    with pytest.raises(StructuralError):
        assemble([b0, b0])
    with pytest.raises(StructuralError):
        assemble([PrecoderBlock(0, b0.matrix, 1.0),
                  PrecoderBlock(1, b1.matrix[:, :3], 1.0)])


def test_sum_rate_hand_computed_case():
    # orthogonal single-antenna-per-user layout: no interference, so the
    # rate is sum_k log2(1 + p_k / sigma2)
    h = np.eye(3, dtype=complex)
    w = np.diag([1.0, 2.0, 3.0]).astype(complex)
    sigma2 = 0.5
    expected = sum(np.log2(1 + p ** 2 / sigma2) for p in (1.0, 2.0, 3.0))
    assert sum_rate(h, w, sigma2) == pytest.approx(expected, rel=1e-12)
    # full interference: both users served by the same beam
    h2 = np.array([[1.0, 1.0]], dtype=complex).T.reshape(1, 2)
    h2 = np.ones((1, 2), dtype=complex)
    w2 = np.ones((1, 2), dtype=complex)
    expected2 = 2 * np.log2(1 + 1.0 / (1.0 + sigma2))
    assert sum_rate(h2, w2, sigma2) == pytest.approx(expected2, rel=1e-12)


def test_sum_rate_rejects_nonpositive_noise():
    with pytest.raises(NumericalDomainError):
        sum_rate(np.eye(2, dtype=complex), np.eye(2, dtype=complex), 0.0)


def test_rates_from_cross_gains_matches_direct_loop():
    gen = np.random.default_rng(6)
    sigma2 = 1e-3
    g = complex_normal(gen, (4, 7, 5, 5))
    fast = rates_from_cross_gains(g.copy(), sigma2)
    slow = np.zeros((4, 7))
    for i in range(4):
        for j in range(7):
            for k in range(5):
                p = np.abs(g[i, j, k]) ** 2
                sinr = p[k] / (p.sum() - p[k] + sigma2)
                slow[i, j] += np.log2(1 + sinr)
    np.testing.assert_allclose(fast, slow, rtol=1e-12)
