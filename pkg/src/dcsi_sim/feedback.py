"""Cost model of the hierarchical information exchange: a shared random
codebook, nearest-codeword quantization of TX 1's precoder block, the
feedback-bit budget as a function of the power split, and the per-draw
tradeoff evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ConfigurationError
from .precoding import rates_from_cross_gains, rzf_block, sum_rate
from .scenario import Scenario
from .stochastics import RngStream, complex_normal
from .strategies import NAIVE, StrategyEngine, StrategySpec, _gemm_gains

DEFAULT_XI_CAP = 22
_CHUNK = 1 << 14  # fixed generation chunk so entries never depend on usage


@dataclass(frozen=True)
class Codebook:
    """A pseudo-random codebook of 2^bits unit-Frobenius-norm matrices.

    Entries are a pure function of (seed, bits, rows, cols): both TX sides
    regenerate them identically. Entries are produced in fixed-size chunks
    from a single sequential stream, so large codebooks never need to be
    materialized at once.
    """

    seed: int
    bits: int
    rows: int
    cols: int

    @property
    def size(self) -> int:
        return 1 << self.bits

    def _generator(self) -> np.random.Generator:
        # seeded independently of the bit budget so a smaller codebook is
        # always a prefix of a larger one with the same seed and shape
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(self.seed, spawn_key=(self.rows,
                                                         self.cols))))

    def iter_chunks(self):
        """Yield (start_index, entries) with entries of shape (c, rows, cols)."""
        gen = self._generator()
        for start in range(0, self.size, _CHUNK):
            c = min(_CHUNK, self.size - start)
            w = complex_normal(gen, (c, self.rows, self.cols))
            nrm = np.linalg.norm(w.reshape(c, -1), axis=1)
            yield start, w / nrm[:, None, None]

    def materialize(self) -> np.ndarray:
        """All entries as one (2^bits, rows, cols) array; small bits only."""
        return np.concatenate([chunk for _, chunk in self.iter_chunks()])

    def entry(self, q: int) -> np.ndarray:
        for start, chunk in self.iter_chunks():
            if start <= q < start + chunk.shape[0]:
                return chunk[q - start]
        raise IndexError(q)


def feedback_bits(bandwidth: float, coherence_time: float, distance: float,
                  pathloss_exponent: float, p_fb: float, sigma2: float
                  ) -> int:
    """Bits deliverable over the out-of-band feedback link,
    floor(B T log2(1 + d^-eta P_fb / sigma^2))."""
    if min(bandwidth, coherence_time, distance, p_fb) < 0 or sigma2 <= 0:
        raise ConfigurationError("feedback_bits arguments out of range")
    snr = distance ** (-pathloss_exponent) * p_fb / sigma2
    return int(np.floor(bandwidth * coherence_time * np.log2(1.0 + snr)))


def build_codebook(seed: int, bits: int, rows: int, cols: int,
                   cap: int = DEFAULT_XI_CAP) -> Codebook:
    if bits < 0:
        raise ConfigurationError("bits must be nonnegative")
    if bits > cap:
        raise CapabilityError(
            f"codebook of 2^{bits} entries exceeds the cap 2^{cap}; lower the "
            "bandwidth-time product or raise feedback.xi_cap")
    return Codebook(seed=int(seed), bits=int(bits), rows=int(rows),
                    cols=int(cols))


def quantize(w1: np.ndarray, codebook: Codebook) -> int:
    """Index of the Frobenius-nearest codeword to the unit-normalized target;
    ties resolve to the smallest index."""
    nrm = np.linalg.norm(w1)
    target = (w1 / nrm if nrm > 0 else w1).reshape(-1)
    # Unit-norm codewords: argmin ||C_q - w|| = argmax Re<C_q, w>.
    best_q = 0
    best_ip = -np.inf
    for start, chunk in codebook.iter_chunks():
        ip = np.real(chunk.reshape(chunk.shape[0], -1).conj() @ target)
        i = int(np.argmax(ip))
        if ip[i] > best_ip:
            best_ip = float(ip[i])
            best_q = start + i
    return best_q


@dataclass(frozen=True)
class PowerSplit:
    """Split of TX 1's budget between feedback and downlink transmission."""

    p_fb: float
    p_tx: float

    def __post_init__(self):
        if self.p_fb < 0 or self.p_tx < 0:
            raise ConfigurationError("power split parts must be nonnegative")

    @property
    def total(self) -> float:
        return self.p_fb + self.p_tx

    @staticmethod
    def from_fraction(p_total: float, fraction: float) -> "PowerSplit":
        if not 0.0 <= fraction <= 1.0:
            raise ConfigurationError("feedback fraction must lie in [0, 1]")
        return PowerSplit(p_fb=p_total * fraction,
                          p_tx=p_total * (1.0 - fraction))


@dataclass(frozen=True)
class TradeoffResult:
    ergodic_rate: float
    std_error: float
    bits: int
    bits_clamped: bool
    rates: np.ndarray


def run_feedback_tradeoff(scenario: Scenario, split: PowerSplit,
                          spec: StrategySpec, draws: int, rng: RngStream,
                          engine: StrategyEngine | None = None,
                          codebook_seed: int = 0,
                          xi_cap: int = DEFAULT_XI_CAP,
                          tx1_transmits_quantized: bool = False,
                          draw_indices=None) -> TradeoffResult:
    """Ergodic rate of the hierarchical naive scheme when TX 1's block is
    exchanged through a rate-limited codebook and its budget is split
    between feedback and transmission."""
    sc = scenario
    if sc.num_tx != 2 or sc.csi_quality[1] != 0.0:
        raise CapabilityError(
            "the feedback tradeoff is defined for 2 TXs with perfect CSI at "
            "TX 2")
    if spec.approach != NAIVE:
        raise CapabilityError("the feedback tradeoff uses the naive approach")
    if abs(split.total - sc.power_budgets[0]) > 1e-9 * sc.power_budgets[0]:
        raise ConfigurationError("power split must sum to TX 1's budget")
    if engine is None:
        engine = StrategyEngine(sc)

    xi_raw = feedback_bits(sc.feedback_bandwidth, sc.coherence_time,
                           sc.tx_distance, sc.pathloss_exponent, split.p_fb,
                           sc.noise_power)
    clamped = xi_raw > xi_cap
    xi = min(xi_raw, xi_cap)
    m1 = sc.antennas_per_tx[0]
    codebook = build_codebook(codebook_seed, xi, m1, sc.num_rx, cap=xi_cap)
    entries = codebook.materialize() if xi <= 18 else None

    sl1 = sc.row_slice(0)
    indices = list(draw_indices) if draw_indices is not None \
        else list(range(draws))
    rates = np.empty(len(indices))
    for i, d in enumerate(indices):
        draw_rng = rng.child(int(d))
        draw = engine.draw_channel(draw_rng)
        a1, _ = engine.decide_naive(0, draw, [], spec)
        w1 = rzf_block(draw.estimates[0], a1, 0, sc).matrix
        q = quantize(w1, codebook)
        cw = entries[q] if entries is not None else codebook.entry(q)
        w1_sent = np.sqrt(split.p_tx) * cw
        if not tx1_transmits_quantized:
            w1_sent_actual = w1 * np.sqrt(
                split.p_tx / sc.power_budgets[0])
        else:
            w1_sent_actual = w1_sent
        # TX 2 best-responds to the codeword it decoded.
        fixed = np.zeros((sc.num_antennas, sc.num_rx), dtype=complex)
        fixed[sl1, :] = w1_sent
        a2, _ = _final_tx_response(engine, draw.true_channel, fixed, spec)
        w2 = rzf_block(draw.true_channel, a2, 1, sc).matrix
        full = np.zeros_like(fixed)
        full[sl1, :] = w1_sent_actual
        full[sc.row_slice(1), :] = w2
        rates[i] = sum_rate(draw.true_channel, full, sc.noise_power)
    mean = float(rates.mean())
    se = float(rates.std(ddof=1) / np.sqrt(len(rates))) \
        if len(rates) > 1 else 0.0
    return TradeoffResult(ergodic_rate=mean, std_error=se, bits=xi,
                          bits_clamped=clamped, rates=rates)


def _final_tx_response(engine: StrategyEngine, h: np.ndarray,
                       fixed: np.ndarray, spec: StrategySpec
                       ) -> tuple[float, float]:
    """TX 2's grid maximization of the true sum rate given a fixed TX 1
    contribution."""
    grid = spec.alpha_grid
    wc, valid = engine._candidate(h, grid, [1])
    g = _gemm_gains(h, wc + fixed)
    obj = rates_from_cross_gains(g, engine.scenario.noise_power)
    return engine._pick(obj, valid, grid)
