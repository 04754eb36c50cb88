"""End-to-end statistical acceptance checks.

Each test exercises one externally stated guarantee of the simulator at full
Monte Carlo scale and prints a single PASS/FAIL line with the measured value.
Channel draws are paired across strategies and sweep points (common random
numbers), so inequality checks use the standard error of the paired
difference.

The full module takes roughly an hour single-threaded; run it with
``pytest tests/test_acceptance.py`` when a release-grade check is needed.
"""
import numpy as np
import pytest

from dcsi_sim.harness import _prop1_regression_error, sweep_rho
from dcsi_sim.precoding import rzf_block, sum_rate
from dcsi_sim.scenario import build_default_scenario
from dcsi_sim.stochastics import RngStream, complex_normal
from dcsi_sim.strategies import StrategyEngine, StrategySpec, spec_from_label
from dcsi_sim.strategies import NAIVE, LOCALLY_ROBUST, GLOBALLY_ROBUST

SEED = 20260826
DRAWS = 1000


def report(name: str, ok: bool, detail: str):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def ergodic_rates(labels, draws, seed, exp_id, overrides=None):
    """Realized sum rate per (draw, strategy) with paired channel draws."""
    sc = build_default_scenario(overrides or {})
    eng = StrategyEngine(sc)
    specs = [spec_from_label(lab) for lab in labels]
    out = np.empty((draws, len(labels)))
    for d in range(draws):
        draw = eng.draw_channel(RngStream(seed, (exp_id, d)))
        for j, sp in enumerate(specs):
            td = eng.run_team(draw, sp, RngStream(seed, (exp_id, 1, d, j)))
            out[d, j] = sum_rate(draw.true_channel, td.precoder.matrix,
                                 sc.noise_power)
    return out


def paired_margin(better, worse):
    """(mean difference, its standard error) over paired draws."""
    d = better - worse
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(len(d)))


def test_conditional_law_matches_regression_oracle():
    # closed-form conditional moments of the channel given a noisy estimate
    # vs linear-regression estimates from a million joint draws
    m = 8
    gen = RngStream(SEED, (10,)).generator()
    worst = 0.0
    for _ in range(5):
        a = complex_normal(gen, (m, m))
        b = complex_normal(gen, (m, m))
        sigma = a @ a.conj().T / m + 0.5 * np.eye(m)
        upsilon = b @ b.conj().T / m + 0.5 * np.eye(m)
        eps = float(gen.uniform(0.2, 0.9))
        err = _prop1_regression_error(sigma, upsilon, eps, 1_000_000, gen)
        worst = max(worst, err)
    ok = worst < 0.02
    report("conditional_law_oracle", ok,
           f"worst relative moment error {worst:.3e} (tolerance 2e-02)")
    assert ok


def test_rzf_solves_its_defining_system_at_exact_power():
    sc = build_default_scenario()
    gen = RngStream(SEED, (11,)).generator()
    m, k = sc.num_antennas, sc.num_rx
    worst_res, worst_pow = 0.0, 0.0
    for _ in range(1000):
        hh = complex_normal(gen, (m, k))
        alpha = float(gen.uniform(0.01, 1.0))
        n = int(gen.integers(0, sc.num_tx))
        blk = rzf_block(hh, alpha, n, sc)
        mat = (1 - alpha) * (hh.conj().T @ hh) + alpha * np.eye(k)
        rows = hh[sc.row_slice(n), :]
        ref = np.linalg.solve(mat.T, rows.T).T
        scale = np.sqrt(blk.power) / np.linalg.norm(ref)
        worst_res = max(worst_res, float(
            np.abs((blk.matrix / scale) @ mat - rows).max()))
        worst_pow = max(worst_pow, abs(
            np.linalg.norm(blk.matrix) ** 2 - blk.power) / blk.power)
    ok = worst_res < 1e-9 and worst_pow < 1e-10
    report("rzf_defining_system", ok,
           f"residual {worst_res:.3e} (tol 1e-09), "
           f"power error {worst_pow:.3e} (tol 1e-10)")
    assert ok


def test_strategies_collapse_under_perfect_local_csi():
    # with a perfect local estimate the robust averaging degenerates and
    # every approach must pick the same grid point as the naive rule
    sc = build_default_scenario({"csi_quality": [0.0, 0.0]})
    eng = StrategyEngine(sc)
    specs = {a: StrategySpec(approach=a) for a in
             (NAIVE, LOCALLY_ROBUST, GLOBALLY_ROBUST)}
    mismatches = 0
    for d in range(100):
        draw = eng.draw_channel(RngStream(SEED, (12, d)))
        rng = RngStream(SEED, (12, 1, d))
        a_naive, _ = eng.decide_naive(0, draw, [], specs[NAIVE])
        a_lr, _ = eng.decide_locally_robust(0, draw, [], specs[LOCALLY_ROBUST],
                                            rng.child(0))
        a_gr, _ = eng.decide_globally_robust(0, draw, [],
                                             specs[GLOBALLY_ROBUST],
                                             rng.child(1))
        if not (a_naive == a_lr == a_gr):
            mismatches += 1
    ok = mismatches == 0
    report("strategy_collapse", ok,
           f"{mismatches}/100 draws with diverging decisions (tol 0)")
    assert ok


def test_hierarchical_strategies_are_ordered_by_refinement():
    labels = ["naive-hier", "lr-hier", "gr-hier", "optimal-hier"]
    r = ergodic_rates(labels, DRAWS, SEED, 13)
    details, ok = [], True
    for a, b in zip(range(3), range(1, 4)):
        gain, se = paired_margin(r[:, b], r[:, a])
        ok = ok and gain >= -3 * se
        details.append(f"{labels[b]}-{labels[a]} {gain:+.4f}(se {se:.4f})")
    report("strategy_ordering", ok, "; ".join(details) + " [>= -3 se each]")
    assert ok


def test_hierarchy_beats_non_hierarchy_across_csi_quality():
    pairs = [("naive-hier", "naive-nonhier"), ("lr-hier", "lr-nonhier"),
             ("gr-hier", "gr-nonhier")]
    labels = [lab for p in pairs for lab in p]
    details, ok = [], True
    for p, rho in enumerate([-10, -5, 0, 5, 10, 15, 20, 25, 30]):
        r = ergodic_rates(labels, DRAWS, SEED, 140 + p,
                          {"rho1_db": float(rho)})
        worst = np.inf
        for j, (hi, lo) in enumerate(pairs):
            gain, se = paired_margin(r[:, 2 * j], r[:, 2 * j + 1])
            ok = ok and gain >= -3 * se
            worst = min(worst, gain / se if se > 0 else np.inf)
        details.append(f"{rho}dB worst z={worst:.1f}")
    report("hierarchy_gain", ok, "; ".join(details) + " [>= -3 each]")
    assert ok


def test_hierarchical_strategies_approach_full_csi_limit():
    labels = ["naive-hier", "lr-hier", "gr-hier", "optimal-hier", "perfect"]
    r = ergodic_rates(labels, 500, SEED, 15, {"rho1_db": 40.0})
    perfect = r[:, -1].mean()
    ratios = r[:, :-1].mean(axis=0) / perfect
    ok = bool(np.all(np.abs(ratios - 1.0) <= 0.05))
    report("high_quality_asymptote", ok,
           "rate/perfect at 40 dB = "
           + ", ".join(f"{lab} {q:.4f}" for lab, q in zip(labels, ratios))
           + " [within 5%]")
    assert ok


def test_hierarchy_gain_grows_with_transmit_power():
    labels = ["gr-hier", "gr-nonhier"]
    gaps = {}
    for p, dbw in enumerate([0.0, 25.0]):
        r = ergodic_rates(labels, DRAWS, SEED, 160 + p,
                          {"rho1_db": 0.0, "power_dbw": dbw})
        gaps[dbw] = paired_margin(r[:, 0], r[:, 1])
    growth = gaps[25.0][0] - gaps[0.0][0]
    noise = np.hypot(gaps[25.0][1], gaps[0.0][1])
    ok = growth > -3 * noise and gaps[25.0][0] > gaps[0.0][0]
    report("power_trend", ok,
           f"gap 0 dBW {gaps[0.0][0]:+.4f}(se {gaps[0.0][1]:.4f}), "
           f"25 dBW {gaps[25.0][0]:+.4f}(se {gaps[25.0][1]:.4f})")
    assert ok


def test_feedback_power_split_has_interior_optimum():
    from dcsi_sim.feedback import PowerSplit, run_feedback_tradeoff
    sc = build_default_scenario({"rho1_db": 0.0})
    spec = spec_from_label("naive-hier")
    p1 = sc.power_budgets[0]
    fracs = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95]
    res = {}
    for f in fracs:
        split = PowerSplit(p_fb=f * p1, p_tx=(1 - f) * p1)
        res[f] = run_feedback_tradeoff(sc, split, spec, DRAWS,
                                       RngStream(SEED, (17,)), xi_cap=20)
    means = {f: r.ergodic_rate for f, r in res.items()}
    peak = max(means, key=means.get)
    interior = fracs[0] < peak < fracs[-1]
    zs = []
    for end in (fracs[0], fracs[-1]):
        gain, se = paired_margin(res[peak].rates, res[end].rates)
        zs.append(gain / se if se > 0 else np.inf)
    ok = interior and all(z >= 3.0 for z in zs)
    report("feedback_tradeoff_shape", ok,
           f"peak at fraction {peak} rate {means[peak]:.4f}; margins over "
           f"endpoints z={zs[0]:.1f}, z={zs[1]:.1f} [interior, z >= 3]")
    assert ok


def test_sweeps_are_deterministic_and_worker_independent(tmp_path):
    from dcsi_sim.config import default_config

    def cfg(workers):
        c = default_config()
        c["mc"].update({"draws": 8, "seed": SEED, "workers": workers})
        c["strategy"].update({"grid_points": 17, "inner_samples": 16,
                              "outer_samples": 8})
        c["sweep"]["rho_db"] = [0.0, 20.0]
        c["sweep"]["strategies"] = ["naive-hier", "lr-hier", "perfect"]
        c["output"]["draw_hash"] = True
        return c

    dirs = {name: tmp_path / name for name in ("a", "b", "w8")}
    sweep_rho(cfg(1), out_dir=str(dirs["a"]))
    sweep_rho(cfg(1), out_dir=str(dirs["b"]))
    sweep_rho(cfg(8), out_dir=str(dirs["w8"]))
    rerun = (dirs["a"] / "rho.csv").read_bytes() \
        == (dirs["b"] / "rho.csv").read_bytes()
    workers = (dirs["a"] / "rho.csv").read_bytes() \
        == (dirs["w8"] / "rho.csv").read_bytes()
    ok = rerun and workers
    report("determinism", ok,
           f"rerun identical={rerun}, 1-vs-8-worker identical={workers}")
    assert ok
