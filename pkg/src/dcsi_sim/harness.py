"""Experiment driver: seeded, worker-count-independent Monte Carlo sweeps
over feedback SNR, per-TX power and feedback power fraction, plus the
self-check battery, with CSV and run-manifest outputs.

Work is partitioned by (sweep point, draw index); every unit derives its
random stream from (master_seed, experiment, indices), so results are
bit-identical regardless of the worker count.
"""
from __future__ import annotations

import hashlib
import json
import multiprocessing
import time
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from . import feedback as fb
from .config import default_config
from .errors import ConfigurationError, DcsiSimError
from .precoding import rzf_block, sum_rate
from .scenario import build_default_scenario
from .stochastics import RNG_ALGORITHM, RngStream
from .strategies import (NAIVE, NON_HIERARCHICAL, StrategyEngine,
                         StrategySpec, spec_from_label)

SCHEMA_VERSION = 1
CSV_HEADER = ("experiment", "x_name", "x_value", "strategy", "ergodic_rate",
              "num_draws", "std_error", "master_seed")

# experiment ids used in rng stream paths
EXP_RHO = 1
EXP_POWER = 2
EXP_FEEDBACK = 3


@dataclass(frozen=True)
class SweepRecord:
    """One CSV row of an experiment sweep."""

    experiment: str
    x_name: str
    x_value: float
    strategy: str
    ergodic_rate: float
    num_draws: int
    std_error: float
    master_seed: int
    draw_hash: str = ""

    def row(self, with_hash: bool) -> list[str]:
        cells = [self.experiment, self.x_name, repr(float(self.x_value)),
                 self.strategy, repr(float(self.ergodic_rate)),
                 str(self.num_draws), repr(float(self.std_error)),
                 str(self.master_seed)]
        if with_hash:
            cells.append(self.draw_hash)
        return cells


def _specs_from_config(cfg: dict, labels=None) -> list[StrategySpec]:
    st = cfg["strategy"]
    labels = labels if labels is not None else cfg["sweep"]["strategies"]
    return [spec_from_label(lab, grid_points=int(st["grid_points"]),
                            inner_samples=int(st["inner_samples"]),
                            outer_samples=int(st["outer_samples"]))
            for lab in labels]


def _chunks(num: int, pieces: int) -> list[range]:
    pieces = max(1, min(pieces, num))
    bounds = np.linspace(0, num, pieces + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(pieces)
            if bounds[i] < bounds[i + 1]]


def _eval_chunk(args):
    """Realized sum rates for a contiguous block of draw indices at one
    sweep point; deterministic given (seed, exp_id, point_idx, indices)."""
    scenario, specs, seed, exp_id, point_idx, idxs, want_hash = args
    engine = StrategyEngine(scenario)
    out = np.empty((len(idxs), len(specs)))
    # one digest per draw so the combined hash is chunking-independent
    digests = []
    for i, d in enumerate(idxs):
        draw = engine.draw_channel(RngStream(seed, (exp_id, d)))
        if want_hash:
            digests.append(hashlib.sha256(draw.true_channel.tobytes())
                           .digest())
        for j, spec in enumerate(specs):
            td = engine.run_team(draw, spec,
                                 RngStream(seed, (exp_id, point_idx, d, j)))
            out[i, j] = sum_rate(draw.true_channel, td.precoder.matrix,
                                 scenario.noise_power)
    return out, b"".join(digests)


def _map(worker, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with multiprocessing.Pool(processes=workers) as pool:
        return pool.map(worker, tasks)


def _point_rates(scenario, specs, draws, seed, exp_id, point_idx, workers,
                 want_hash=False):
    """Per-strategy realized-rate arrays over paired draws at one point."""
    tasks = [(scenario, specs, seed, exp_id, point_idx, list(r), want_hash)
             for r in _chunks(draws, workers * 4)]
    results = _map(_eval_chunk, tasks, workers)
    rates = np.concatenate([r for r, _ in results], axis=0)
    combined = ""
    if want_hash:
        h = hashlib.sha256()
        for _, d in results:
            h.update(d)
        combined = h.hexdigest()[:16]
    return rates, combined


def _records_for_point(experiment, x_name, x_value, labels, rates, seed,
                       draw_hash) -> list[SweepRecord]:
    out = []
    n = rates.shape[0]
    for j, lab in enumerate(labels):
        col = rates[:, j]
        se = float(col.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        out.append(SweepRecord(
            experiment=experiment, x_name=x_name, x_value=float(x_value),
            strategy=lab, ergodic_rate=float(col.mean()), num_draws=n,
            std_error=se, master_seed=seed, draw_hash=draw_hash))
    return out


def sweep_rho(cfg: dict | None = None, out_dir: str | None = None
              ) -> list[SweepRecord]:
    """Ergodic rate vs feedback SNR of TX 1, all configured strategies."""
    cfg = cfg or default_config()
    labels = list(cfg["sweep"]["strategies"])
    if not labels:
        raise ConfigurationError("sweep.strategies must be nonempty")
    specs = _specs_from_config(cfg)
    seed = int(cfg["mc"]["seed"])
    draws = int(cfg["mc"]["draws"])
    workers = int(cfg["mc"]["workers"])
    want_hash = bool(cfg["output"]["draw_hash"])
    records = []
    for p, rho_db in enumerate(cfg["sweep"]["rho_db"]):
        overrides = dict(cfg["scenario"])
        overrides.pop("csi_quality", None)
        overrides["rho1_db"] = float(rho_db)
        scenario = build_default_scenario(overrides)
        rates, dh = _point_rates(scenario, specs, draws, seed, EXP_RHO, p,
                                 workers, want_hash)
        records.extend(_records_for_point(
            "rho", "rho1_db", rho_db, labels, rates, seed, dh))
    if out_dir is not None:
        write_csv(Path(out_dir) / "rho.csv", records, want_hash)
    return records


def sweep_power(cfg: dict | None = None, out_dir: str | None = None
                ) -> list[SweepRecord]:
    """Ergodic rate vs per-TX power budget at the configured feedback SNR."""
    cfg = cfg or default_config()
    labels = list(cfg["sweep"]["strategies"])
    if not labels:
        raise ConfigurationError("sweep.strategies must be nonempty")
    specs = _specs_from_config(cfg)
    seed = int(cfg["mc"]["seed"])
    draws = int(cfg["mc"]["draws"])
    workers = int(cfg["mc"]["workers"])
    want_hash = bool(cfg["output"]["draw_hash"])
    records = []
    for p, p_dbw in enumerate(cfg["sweep"]["power_dbw"]):
        overrides = dict(cfg["scenario"])
        overrides.pop("power_budgets", None)
        overrides["power_dbw"] = float(p_dbw)
        scenario = build_default_scenario(overrides)
        rates, dh = _point_rates(scenario, specs, draws, seed, EXP_POWER, p,
                                 workers, want_hash)
        records.extend(_records_for_point(
            "power", "power_dbw", p_dbw, labels, rates, seed, dh))
    if out_dir is not None:
        write_csv(Path(out_dir) / "power.csv", records, want_hash)
    return records


def _feedback_chunk(args):
    scenario, spec, split, seed, codebook_seed, xi_cap, quantized, idxs = args
    engine = StrategyEngine(scenario)
    res = fb.run_feedback_tradeoff(
        scenario, split, spec, len(idxs), RngStream(seed, (EXP_FEEDBACK,)),
        engine=engine, codebook_seed=codebook_seed, xi_cap=xi_cap,
        tx1_transmits_quantized=quantized, draw_indices=idxs)
    return res.rates, res.bits, res.bits_clamped


def sweep_feedback(cfg: dict | None = None, out_dir: str | None = None
                   ) -> list[SweepRecord]:
    """Ergodic rate vs feedback power fraction: the hierarchical naive scheme
    with quantized exchange, against the non-hierarchical naive baseline at
    full power."""
    cfg = cfg or default_config()
    st = cfg["strategy"]
    seed = int(cfg["mc"]["seed"])
    draws = int(cfg["mc"]["draws"])
    workers = int(cfg["mc"]["workers"])
    fractions = [float(f) for f in cfg["sweep"]["feedback_fractions"]]
    spec = StrategySpec(approach=NAIVE,
                        alpha_grid=np.linspace(0, 1, int(st["grid_points"])))
    scenario = build_default_scenario(dict(cfg["scenario"]))

    # Fraction-independent baseline over the same channel draws.
    base_spec = StrategySpec(approach=NAIVE, hierarchy=NON_HIERARCHICAL,
                             alpha_grid=spec.alpha_grid)
    base_rates, _ = _point_rates(scenario, [base_spec], draws, seed,
                                 EXP_FEEDBACK, 0, workers)
    base = base_rates[:, 0]

    records = []
    for p, frac in enumerate(fractions):
        split = fb.PowerSplit.from_fraction(scenario.power_budgets[0], frac)
        tasks = [(scenario, spec, split, seed,
                  int(cfg["feedback"]["codebook_seed"]),
                  int(cfg["feedback"]["xi_cap"]),
                  bool(cfg["feedback"]["tx1_transmits_quantized"]), list(r))
                 for r in _chunks(draws, workers * 2)]
        results = _map(_feedback_chunk, tasks, workers)
        rates = np.concatenate([r for r, _, _ in results])
        se = float(rates.std(ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
        records.append(SweepRecord(
            experiment="feedback", x_name="feedback_fraction",
            x_value=frac, strategy="naive-hier-quantized",
            ergodic_rate=float(rates.mean()), num_draws=draws,
            std_error=se, master_seed=seed))
        se_b = float(base.std(ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
        records.append(SweepRecord(
            experiment="feedback", x_name="feedback_fraction",
            x_value=frac, strategy="naive-nonhier-fullpower",
            ergodic_rate=float(base.mean()), num_draws=draws,
            std_error=se_b, master_seed=seed))
    if out_dir is not None:
        write_csv(Path(out_dir) / "feedback.csv", records, False)
    return records


def write_csv(path, records: list[SweepRecord], with_hash: bool = False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = CSV_HEADER + (("draw_hash",) if with_hash else ())
    lines = [f"# dcsi-sim sweep schema v{SCHEMA_VERSION}",
             ",".join(header)]
    lines += [",".join(r.row(with_hash)) for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_manifest(out_dir, cfg: dict, experiments: dict[str, float]):
    """Run metadata sufficient to reproduce every CSV row."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        version = metadata.version("dcsi-sim")
    except metadata.PackageNotFoundError:
        version = "unknown"
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "code_version": version,
        "rng_algorithm": RNG_ALGORITHM,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "experiment_wall_time_s": experiments,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2),
                                       encoding="utf-8")


# ----- validation battery ----------------------------------------------------


@dataclass
class CheckResult:
    name: str
    tolerance: float
    measured: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name}: measured {self.measured:.3e} "
                f"(tolerance {self.tolerance:.3e})")


def validate(cfg: dict | None = None, inject: dict | None = None
             ) -> list[CheckResult]:
    """Module-level oracle checks run against a fresh default scenario.

    ``inject`` supports negative controls for testing the battery itself
    (e.g. {"corrupt_sigma": True}).
    """
    cfg = cfg or default_config()
    inject = inject or {}
    seed = int(cfg["mc"]["seed"])
    checks: list[CheckResult] = []
    scenario = build_default_scenario(dict(cfg["scenario"]))
    engine = StrategyEngine(scenario)
    gen = RngStream(seed, (99,)).generator()

    # steering vectors have unit-modulus entries
    from .scenario import steering_vector
    worst = 0.0
    for theta in np.linspace(0, np.pi, 17):
        a = steering_vector(theta, 8, 0.5)
        worst = max(worst, float(np.abs(np.abs(a) - 1).max()))
    checks.append(CheckResult("steering_unit_modulus", 1e-12, worst,
                              worst < 1e-12))

    # covariance hermitian / PSD / trace identity
    worst_h, worst_eig, worst_tr = 0.0, 0.0, 0.0
    for k in range(scenario.num_rx):
        for n in range(scenario.num_tx):
            s = np.array(engine.covs.per_link[k][n])
            if inject.get("corrupt_sigma"):
                s = s + 1e-3 * 1j * np.eye(s.shape[0])
            worst_h = max(worst_h, float(np.abs(s - s.conj().T).max()))
            w = np.linalg.eigvalsh((s + s.conj().T) / 2)
            tr = float(np.real(np.trace(s)))
            worst_eig = max(worst_eig, float(-w.min() / max(tr, 1e-300)))
            expect = scenario.antennas_per_tx[n] * \
                scenario.attenuations[k, n] ** 2
            worst_tr = max(worst_tr, abs(tr - expect) / expect)
    checks.append(CheckResult("covariance_hermitian", 1e-12, worst_h,
                              worst_h < 1e-12))
    checks.append(CheckResult("covariance_psd", 1e-10, worst_eig,
                              worst_eig < 1e-10))
    checks.append(CheckResult("covariance_trace", 1e-8, worst_tr,
                              worst_tr < 1e-8))

    # conditional-law moment check against joint sampling (reduced scale)
    from .stochastics import complex_normal, conditional_h_given_estimate
    m = scenario.num_antennas
    sig = np.array(engine.covs.per_rx[0])
    if inject.get("corrupt_sigma"):
        sig = sig + 1e-3 * 1j * np.eye(m)
    try:
        err = _prop1_regression_error(sig, scenario.error_covariances[0],
                                      scenario.csi_quality[0], 1_000_000, gen)
    except DcsiSimError:
        err = float("inf")
    checks.append(CheckResult("conditional_law_regression", 0.05, err,
                              err < 0.05))

    # RZF residual and power equality
    worst_res, worst_pow = 0.0, 0.0
    for _ in range(200):
        hh = complex_normal(gen, (m, scenario.num_rx))
        alpha = float(gen.uniform(0.01, 1.0))
        n = int(gen.integers(0, scenario.num_tx))
        blk = rzf_block(hh, alpha, n, scenario)
        gram = hh.conj().T @ hh
        mat = (1 - alpha) * gram + alpha * np.eye(scenario.num_rx)
        rows = hh[scenario.row_slice(n), :]
        b = rows @ np.linalg.inv(mat)
        scale = np.sqrt(blk.power) / np.linalg.norm(b)
        res = np.abs((blk.matrix / scale) @ mat - rows).max()
        worst_res = max(worst_res, float(res))
        worst_pow = max(worst_pow, abs(
            np.linalg.norm(blk.matrix) ** 2 - blk.power) / blk.power)
    checks.append(CheckResult("rzf_defining_system_residual", 1e-9,
                              worst_res, worst_res < 1e-9))
    checks.append(CheckResult("rzf_power_equality", 1e-10, worst_pow,
                              worst_pow < 1e-10))

    # quantizer equals an exhaustive scan
    cb = fb.build_codebook(int(cfg["feedback"]["codebook_seed"]), 8,
                           scenario.antennas_per_tx[0], scenario.num_rx)
    entries = cb.materialize()
    mismatches = 0
    for _ in range(50):
        target = complex_normal(gen, entries.shape[1:])
        q = fb.quantize(target, cb)
        t = target / np.linalg.norm(target)
        dists = np.linalg.norm(entries - t, axis=(1, 2))
        if q != int(np.argmin(dists)):
            mismatches += 1
    checks.append(CheckResult("quantizer_scan_equivalence", 0.0,
                              float(mismatches), mismatches == 0))

    # naive decision equals a direct per-grid-point re-evaluation
    spec = StrategySpec(approach=NAIVE)
    mismatches = 0
    for i in range(5):
        draw = engine.draw_channel(RngStream(seed, (98, i)))
        a, _ = engine.decide_naive(0, draw, [], spec)
        best, best_alpha = -np.inf, None
        for alpha in spec.alpha_grid:
            w = np.zeros((m, scenario.num_rx), dtype=complex)
            for n in range(scenario.num_tx):
                w[scenario.row_slice(n), :] = rzf_block(
                    draw.estimates[0], float(alpha), n, scenario).matrix
            r = sum_rate(draw.estimates[0], w, scenario.noise_power)
            if r > best:
                best, best_alpha = r, float(alpha)
        if best_alpha != a:
            mismatches += 1
    checks.append(CheckResult("naive_decision_grid_oracle", 0.0,
                              float(mismatches), mismatches == 0))

    # estimate reconstruction identity
    draw = engine.draw_channel(RngStream(seed, (97,)))
    eps = scenario.csi_quality[0]
    recon = (draw.estimates[0] - np.sqrt(1 - eps ** 2) * draw.true_channel) \
        / eps
    err = float(np.abs(recon - draw.error_draws[0]).max())
    checks.append(CheckResult("estimate_reconstruction", 1e-12, err,
                              err < 1e-12))
    return checks


def _prop1_regression_error(sigma, upsilon, eps, num, gen) -> float:
    """Relative Frobenius error between the closed-form conditional moments
    and linear-regression estimates from joint draws."""
    from .stochastics import (_mmse_gain, complex_normal,
                              conditional_h_given_estimate, psd_factor)
    m = sigma.shape[0]
    lh = psd_factor(sigma)
    lu = psd_factor(upsilon)
    h = (lh @ complex_normal(gen, (m, num)))
    e = (lu @ complex_normal(gen, (m, num)))
    hhat = np.sqrt(1 - eps ** 2) * h + eps * e
    # regression gain: E[h hhat^H] E[hhat hhat^H]^{-1}
    c_hy = h @ hhat.conj().T / num
    c_yy = hhat @ hhat.conj().T / num
    gain_emp = c_hy @ np.linalg.inv(c_yy)
    resid = h - gain_emp @ hhat
    cov_emp = resid @ resid.conj().T / num
    cond = conditional_h_given_estimate(hhat[:, 0], sigma, upsilon, eps)
    gain_ref = _mmse_gain(sigma, upsilon, eps)
    err_gain = np.linalg.norm(gain_emp - gain_ref) / \
        max(np.linalg.norm(gain_ref), 1e-300)
    err_cov = np.linalg.norm(cov_emp - cond.cov) / \
        max(np.linalg.norm(cond.cov), 1e-300)
    return float(max(err_gain, err_cov))
