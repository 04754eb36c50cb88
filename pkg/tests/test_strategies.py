"""Per-TX decision rules, team runs, and their supporting kernels."""
import numpy as np
import pytest

from dcsi_sim.errors import CapabilityError, ConfigurationError
from dcsi_sim.precoding import rzf_block, sum_rate
from dcsi_sim.scenario import build_default_scenario
from dcsi_sim.stochastics import RngStream, complex_normal
from dcsi_sim.strategies import (LOCALLY_ROBUST, NAIVE, NON_HIERARCHICAL,
                                 STRATEGY_LABELS, StrategyEngine,
                                 StrategySpec, _gemm_gains, _paired_gains,
                                 default_alpha_grid, spec_from_label)


@pytest.fixture(scope="module")
def engine():
    return StrategyEngine(build_default_scenario())


def _draw(engine, i=0):
    return engine.draw_channel(RngStream(21, (i,)))


def test_gain_kernels_match_reference_contraction():
    gen = np.random.default_rng(0)
    hs = complex_normal(gen, (3, 8, 5))
    w = complex_normal(gen, (4, 6, 8, 5))
    ref = np.einsum("smk,eamj->seakj", hs.conj(), w)
    np.testing.assert_allclose(_gemm_gains(hs, w), ref, atol=1e-12)
    # single channel matrix
    ref1 = np.einsum("mk,amj->akj", hs[0].conj(), w[0])
    np.testing.assert_allclose(_gemm_gains(hs[0], w[0]), ref1, atol=1e-12)
    # paired variant shares the sample axis
    wp = complex_normal(gen, (3, 6, 8, 5))
    refp = np.einsum("smk,samj->sakj", hs.conj(), wp)
    np.testing.assert_allclose(_paired_gains(hs, wp), refp, atol=1e-12)


def test_spec_labels_round_trip():
    for label in STRATEGY_LABELS:
        spec = spec_from_label(label)
        assert spec.label() == label
    with pytest.raises(CapabilityError):
        spec_from_label("no-such-strategy")


def test_spec_rejects_bad_grid():
    with pytest.raises(ConfigurationError):
        StrategySpec(approach=NAIVE, alpha_grid=np.array([0.0, 0.5]))
    with pytest.raises(ConfigurationError):
        StrategySpec(approach=NAIVE, alpha_grid=np.array([0.0, 0.7, 0.5,
                                                          1.0]))
    with pytest.raises(CapabilityError):
        StrategySpec(approach="not-an-approach")


def test_pick_prefers_smallest_alpha_on_ties(engine):
    grid = np.array([0.0, 0.5, 1.0])
    obj = np.array([1.0, 1.0, 0.5])
    alpha, val = engine._pick(obj, np.ones(3, dtype=bool), grid)
    assert alpha == 0.0 and val == 1.0
    # invalid entries are skipped even when their objective is highest
    alpha, _ = engine._pick(np.array([2.0, 1.0, 0.5]),
                            np.array([False, True, True]), grid)
    assert alpha == 0.5


def test_naive_decision_matches_per_alpha_reevaluation(engine):
    # independent oracle: rebuild every grid candidate block by block and
    # evaluate the assumed-true-channel sum rate directly
    sc = engine.scenario
    spec = spec_from_label("naive-hier")
    for i in range(4):
        draw = _draw(engine, i)
        alpha, _ = engine.decide_naive(0, draw, [], spec)
        best, best_alpha = -np.inf, None
        for a in spec.alpha_grid:
            w = np.zeros((sc.num_antennas, sc.num_rx), dtype=complex)
            for n in range(sc.num_tx):
                w[sc.row_slice(n)] = rzf_block(draw.estimates[0], float(a),
                                               n, sc).matrix
            r = sum_rate(draw.estimates[0], w, sc.noise_power)
            if r > best:
                best, best_alpha = r, float(a)
        assert alpha == best_alpha


def test_locally_robust_matches_monte_carlo_reevaluation(engine):
    # independent oracle replaying the identical sample stream
    sc = engine.scenario
    spec = StrategySpec(approach=LOCALLY_ROBUST, hierarchy=NON_HIERARCHICAL,
                        alpha_grid=default_alpha_grid(9), inner_samples=32)
    draw = _draw(engine)
    rng = RngStream(22, (0,))
    alpha, _ = engine.decide_locally_robust(0, draw, [], spec, rng)
    hs = engine.models[0].sample_h_given(draw.estimates[0], 32,
                                         rng.child(0).generator())
    best, best_alpha = -np.inf, None
    for a in spec.alpha_grid:
        w = np.zeros((sc.num_antennas, sc.num_rx), dtype=complex)
        for n in range(sc.num_tx):
            w[sc.row_slice(n)] = rzf_block(draw.estimates[0], float(a),
                                           n, sc).matrix
        r = np.mean([sum_rate(h, w, sc.noise_power) for h in hs])
        if r > best:
            best, best_alpha = r, float(a)
    assert alpha == best_alpha


def test_decisions_are_deterministic(engine):
    draw = _draw(engine)
    for label in ("lr-hier", "gr-hier", "gr-nonhier", "optimal-hier"):
        spec = spec_from_label(label)
        d1 = engine.run_team(draw, spec, RngStream(5, (0,)))
        d2 = engine.run_team(draw, spec, RngStream(5, (0,)))
        assert d1.alphas == d2.alphas
        np.testing.assert_array_equal(d1.precoder.matrix, d2.precoder.matrix)


def test_alphas_live_on_the_grid(engine):
    draw = _draw(engine)
    for label in STRATEGY_LABELS:
        spec = spec_from_label(label)
        dec = engine.run_team(draw, spec, RngStream(6, (0,)))
        for a in dec.alphas:
            assert np.isclose(spec.alpha_grid, a).any()
        # every block meets its power budget exactly
        for n, blk in enumerate(dec.precoder.blocks):
            assert np.linalg.norm(blk.matrix) ** 2 == pytest.approx(
                engine.scenario.power_budgets[n], rel=1e-12)


def test_perfect_centralized_uses_one_shared_alpha(engine):
    draw = _draw(engine)
    dec = engine.run_team(draw, spec_from_label("perfect"),
                          RngStream(7, (0,)))
    assert dec.alphas[0] == dec.alphas[1]


def test_strategies_collapse_when_all_estimates_are_perfect():
    sc = build_default_scenario({"csi_quality": (0.0, 0.0)})
    engine = StrategyEngine(sc)
    for i in range(5):
        draw = engine.draw_channel(RngStream(31, (i,)))
        rng = RngStream(32, (i,))
        spec = spec_from_label("naive-hier")
        a_na, _ = engine.decide_naive(0, draw, [], spec)
        a_lr, _ = engine.decide_locally_robust(0, draw, [], spec,
                                               rng.child(0))
        a_gr, _ = engine.decide_globally_robust(0, draw, [], spec,
                                                rng.child(1))
        assert a_na == a_lr == a_gr


def test_optimal_requires_perfect_csi_at_the_last_tx():
    sc = build_default_scenario({"csi_quality": (0.5, 0.5)})
    engine = StrategyEngine(sc)
    draw = engine.draw_channel(RngStream(41, (0,)))
    with pytest.raises(CapabilityError):
        engine.run_team(draw, spec_from_label("optimal-hier"),
                        RngStream(41, (1,)))


def test_grid_refinement_only_improves_the_naive_objective(engine):
    # a denser grid containing the coarse one can only raise the optimum
    draw = _draw(engine)
    coarse = StrategySpec(approach="naive", alpha_grid=default_alpha_grid(9))
    fine = StrategySpec(approach="naive", alpha_grid=default_alpha_grid(33))
    _, v_coarse = engine.decide_naive(0, draw, [], coarse)
    _, v_fine = engine.decide_naive(0, draw, [], fine)
    assert v_fine >= v_coarse - 1e-12


def test_hierarchical_conditioning_changes_the_followup_decision(engine):
    # TX 2 sees TX 1's block in the hierarchical run; its objective value
    # must equal the naive objective evaluated with that block fixed
    draw = _draw(engine)
    spec_h = spec_from_label("naive-hier")
    a1, _ = engine.decide_naive(0, draw, [], spec_h)
    a2, v2 = engine.decide_naive(1, draw, [a1], spec_h)
    sc = engine.scenario
    w = np.zeros((sc.num_antennas, sc.num_rx), dtype=complex)
    w[sc.row_slice(0)] = rzf_block(draw.estimates[0], a1, 0, sc).matrix
    w[sc.row_slice(1)] = rzf_block(draw.estimates[1], a2, 1, sc).matrix
    assert v2 == pytest.approx(sum_rate(draw.estimates[1], w,
                                        sc.noise_power), rel=1e-12)
