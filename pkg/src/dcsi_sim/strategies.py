"""Per-TX regularization-factor selection under the naive, locally robust,
globally robust and optimal approaches, for hierarchical and non-hierarchical
CSI configurations.

Every one-dimensional maximization is an exhaustive search over a shared
alpha grid, with ties broken toward the smallest alpha. Expectations are
sample averages with common random numbers across grid points: the Monte
Carlo draws are generated once per decision and reused for every candidate
alpha, so the argmax is stable at small sample counts.

TX indices are 0-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (CapabilityError, ConfigurationError,
                     DegeneratePrecoderError)
from .precoding import (NetworkPrecoder, assemble, rates_from_cross_gains,
                        rzf_block, rzf_directions)
from .scenario import CovarianceSet, Scenario, assemble_covariances
from .stochastics import (ChannelDraw, RngStream, TxConditionalModel,
                          channel_factors, sample_channel, sample_estimates)

NAIVE = "naive"
LOCALLY_ROBUST = "locally_robust"
GLOBALLY_ROBUST = "globally_robust"
OPTIMAL = "optimal"
PERFECT_CENTRALIZED = "perfect_centralized"
APPROACHES = (NAIVE, LOCALLY_ROBUST, GLOBALLY_ROBUST, OPTIMAL,
              PERFECT_CENTRALIZED)

HIERARCHICAL = "hierarchical"
NON_HIERARCHICAL = "non_hierarchical"

#: CSV/CLI labels for the strategy variants.
STRATEGY_LABELS = {
    "naive-hier": (NAIVE, HIERARCHICAL),
    "naive-nonhier": (NAIVE, NON_HIERARCHICAL),
    "lr-hier": (LOCALLY_ROBUST, HIERARCHICAL),
    "lr-nonhier": (LOCALLY_ROBUST, NON_HIERARCHICAL),
    "gr-hier": (GLOBALLY_ROBUST, HIERARCHICAL),
    "gr-nonhier": (GLOBALLY_ROBUST, NON_HIERARCHICAL),
    "optimal-hier": (OPTIMAL, HIERARCHICAL),
    "optimal-nonhier": (OPTIMAL, NON_HIERARCHICAL),
    "perfect": (PERFECT_CENTRALIZED, HIERARCHICAL),
}

# rng sub-path purposes within one decision
_PATH_H = 0
_PATH_EST = 1
_PATH_TX = 10


def default_alpha_grid(points: int = 33) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def _gemm_gains(hs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Cross gains g[..., k, j] = h_k^H w_j for a channel batch hs of shape
    (S, M, K) or (M, K) and a precoder batch w of shape (*B, M, K) that is
    independent of the channel batch; returns (S, *B, K, K).

    Runs as a single GEMM over the stacked batches, which is much faster
    than per-pair products for the small matrices involved.
    """
    single = hs.ndim == 2
    if single:
        hs = hs[None]
    s, m, k = hs.shape
    b = w.shape[:-2]
    j = w.shape[-1]
    lhs = hs.conj().transpose(0, 2, 1).reshape(s * k, m)
    rhs = np.moveaxis(w.reshape(-1, m, j), 1, 0).reshape(m, -1)
    g = (lhs @ rhs).reshape((s, k) + b + (j,))
    g = np.ascontiguousarray(np.moveaxis(g, 1, -2))
    return g[0] if single else g


def _paired_gains(hs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Cross gains when the precoder batch shares the channel batch:
    hs (S, M, K), w (S, A, M, K) -> (S, A, K, K)."""
    return np.matmul(hs.conj().transpose(0, 2, 1)[:, None], w)


@dataclass(frozen=True)
class StrategySpec:
    """One strategy variant plus its search/sampling parameters."""

    approach: str
    hierarchy: str = HIERARCHICAL
    alpha_grid: np.ndarray = field(default_factory=default_alpha_grid)
    inner_samples: int = 200   # draws of H | local estimate
    outer_samples: int = 20    # draws of more-informed estimates (GR/optimal)

    def __post_init__(self):
        if self.approach not in APPROACHES:
            raise CapabilityError(f"unknown approach {self.approach!r}")
        if self.hierarchy not in (HIERARCHICAL, NON_HIERARCHICAL):
            raise CapabilityError(f"unknown hierarchy {self.hierarchy!r}")
        grid = np.asarray(self.alpha_grid, dtype=float)
        if grid.ndim != 1 or len(grid) < 1 or np.any(np.diff(grid) <= 0) \
                or grid[0] != 0.0 or grid[-1] != 1.0:
            raise ConfigurationError(
                "alpha_grid must be strictly ascending from 0 to 1")
        grid.setflags(write=False)
        object.__setattr__(self, "alpha_grid", grid)
        if self.inner_samples < 1 or self.outer_samples < 1:
            raise ConfigurationError("sample counts must be >= 1")

    def label(self) -> str:
        for lab, (a, h) in STRATEGY_LABELS.items():
            if a == self.approach and (a == PERFECT_CENTRALIZED
                                       or h == self.hierarchy):
                return lab
        raise CapabilityError("unlabeled strategy")


def spec_from_label(label: str, grid_points: int = 33,
                    inner_samples: int = 200, outer_samples: int = 20
                    ) -> StrategySpec:
    if label not in STRATEGY_LABELS:
        raise CapabilityError(
            f"unknown strategy label {label!r}; known: "
            f"{sorted(STRATEGY_LABELS)}")
    approach, hierarchy = STRATEGY_LABELS[label]
    return StrategySpec(approach=approach, hierarchy=hierarchy,
                        alpha_grid=default_alpha_grid(grid_points),
                        inner_samples=inner_samples,
                        outer_samples=outer_samples)


@dataclass(frozen=True)
class TeamDecision:
    """The alphas chosen by all TXs and the resulting network precoder."""

    alphas: tuple[float, ...]
    precoder: NetworkPrecoder
    objective_values: tuple[float, ...]


class StrategyEngine:
    """Precomputed per-scenario machinery shared across Monte Carlo draws:
    covariances, channel sampling factors and conditional models."""

    def __init__(self, scenario: Scenario, covs: CovarianceSet | None = None,
                 quadrature_points: int = 256):
        self.scenario = scenario
        self.covs = covs if covs is not None else assemble_covariances(
            scenario, quadrature_points)
        self.factors = channel_factors(self.covs)
        self.models = [TxConditionalModel(scenario, self.covs, n)
                       for n in range(scenario.num_tx)]

    # ----- sampling -------------------------------------------------------

    def draw_channel(self, rng: RngStream) -> ChannelDraw:
        h = sample_channel(self.covs, rng.child(0), self.factors)
        return sample_estimates(h, self.scenario, rng.child(1))

    # ----- shared helpers -------------------------------------------------

    def _inner(self, n: int, spec: StrategySpec) -> int:
        """Inner sample count for TX n; a perfect estimate has a degenerate
        conditional law, so one sample carries the whole expectation."""
        return 1 if self.scenario.csi_quality[n] == 0.0 else spec.inner_samples

    def _candidate(self, x: np.ndarray, grid: np.ndarray, tx_list
                   ) -> tuple[np.ndarray, np.ndarray]:
        """Stacked sum of RZF blocks built from estimate x with the grid
        alpha, for the TXs in tx_list; shape (A, M, K) plus validity mask."""
        f, valid = rzf_directions(x, grid)
        w = np.zeros_like(f)
        for n in tx_list:
            sl = self.scenario.row_slice(n)
            rows = f[:, sl, :]
            nrm = np.linalg.norm(rows, axis=(1, 2))
            valid = valid & (nrm > 0)
            safe = np.where(nrm > 0, nrm, 1.0)
            w[:, sl, :] = (np.sqrt(self.scenario.power_budgets[n])
                           * rows / safe[:, None, None])
        return w, valid

    def _fixed_matrix(self, draw: ChannelDraw, prior_alphas, upto: int
                      ) -> np.ndarray:
        """Stacked blocks of the less informed TXs 0..upto-1 at their already
        decided alphas (zero rows elsewhere)."""
        w = np.zeros((self.scenario.num_antennas, self.scenario.num_rx),
                     dtype=complex)
        for ell in range(upto):
            blk = rzf_block(draw.estimates[ell], prior_alphas[ell], ell,
                            self.scenario)
            w[self.scenario.row_slice(ell), :] = blk.matrix
        return w

    @staticmethod
    def _pick(objective: np.ndarray, valid: np.ndarray, grid: np.ndarray
              ) -> tuple[float, float]:
        if not np.any(valid):
            raise DegeneratePrecoderError("every alpha grid point failed")
        obj = np.where(valid, objective, -np.inf)
        i = int(np.argmax(obj))  # first max = smallest alpha on ties
        return float(grid[i]), float(obj[i])

    def _batched_rzf_sum(self, xs: np.ndarray, grid: np.ndarray, tx_list
                         ) -> tuple[np.ndarray, np.ndarray]:
        """_candidate applied to a batch of estimates, shapes (S, A, M, K)
        and validity (S, A)."""
        s, m, k = xs.shape
        a = len(grid)
        xh = xs.conj().transpose(0, 2, 1)
        gram = np.matmul(xh, xs)
        mats = ((1.0 - grid)[:, None, None] * gram[:, None]
                + grid[:, None, None] * np.eye(k))
        rhs = np.broadcast_to(xh[:, None], (s, a, k, m))
        try:
            f = np.linalg.solve(mats, rhs).conj().transpose(0, 1, 3, 2)
            valid = np.ones((s, a), dtype=bool)
        except np.linalg.LinAlgError:
            # rare singular system: fall back to the per-sample path
            out = np.empty((s, a, m, k), dtype=complex)
            valid = np.empty((s, a), dtype=bool)
            for i in range(s):
                out[i], valid[i] = self._candidate(xs[i], grid, tx_list)
            return out, valid
        w = np.zeros_like(f)
        for n in tx_list:
            sl = self.scenario.row_slice(n)
            rows = f[:, :, sl, :]
            nrm = np.linalg.norm(rows, axis=(2, 3))
            valid = valid & (nrm > 0)
            safe = np.where(nrm > 0, nrm, 1.0)
            w[:, :, sl, :] = (np.sqrt(self.scenario.power_budgets[n])
                              * rows / safe[:, :, None, None])
        return w, valid

    # ----- per-TX decisions -----------------------------------------------

    def decide_naive(self, n: int, draw: ChannelDraw, prior_alphas,
                     spec: StrategySpec) -> tuple[float, float]:
        """Deterministic decision assuming the local estimate is the true
        channel and is shared by the more informed TXs."""
        grid = spec.alpha_grid
        x = draw.estimates[n]
        if spec.hierarchy == HIERARCHICAL:
            fixed = self._fixed_matrix(draw, prior_alphas, n)
            tx_list = range(n, self.scenario.num_tx)
        else:
            fixed = 0.0
            tx_list = range(self.scenario.num_tx)
        wc, valid = self._candidate(x, grid, tx_list)
        g = _gemm_gains(x, wc + fixed)
        obj = rates_from_cross_gains(g, self.scenario.noise_power)
        return self._pick(obj, valid, grid)

    def decide_locally_robust(self, n: int, draw: ChannelDraw, prior_alphas,
                              spec: StrategySpec, rng: RngStream
                              ) -> tuple[float, float]:
        """Averages the naive objective over draws of the channel from its
        conditional law given the local estimate."""
        grid = spec.alpha_grid
        x = draw.estimates[n]
        if spec.hierarchy == HIERARCHICAL:
            fixed = self._fixed_matrix(draw, prior_alphas, n)
            tx_list = range(n, self.scenario.num_tx)
        else:
            fixed = 0.0
            tx_list = range(self.scenario.num_tx)
        wc, valid = self._candidate(x, grid, tx_list)
        hs = self.models[n].sample_h_given(
            x, self._inner(n, spec), rng.child(_PATH_H).generator())
        g = _gemm_gains(hs, wc + fixed)
        obj = rates_from_cross_gains(g, self.scenario.noise_power).mean(axis=0)
        return self._pick(obj, valid, grid)

    def decide_globally_robust(self, n: int, draw: ChannelDraw, prior_alphas,
                               spec: StrategySpec, rng: RngStream
                               ) -> tuple[float, float]:
        """Additionally draws the more informed TXs' estimates from their
        conditional laws, reusing the deciding TX's alpha for their blocks."""
        grid = spec.alpha_grid
        sc = self.scenario
        x = draw.estimates[n]
        if spec.hierarchy == HIERARCHICAL:
            fixed = self._fixed_matrix(draw, prior_alphas, n)
            drawn = [ell for ell in range(sc.num_tx) if ell > n]
        else:
            fixed = 0.0
            drawn = [ell for ell in range(sc.num_tx) if ell != n]
        w_own, valid = self._candidate(x, grid, [n])
        hs = self.models[n].sample_h_given(
            x, self._inner(n, spec), rng.child(_PATH_H).generator())
        g_base = _gemm_gains(hs, w_own + fixed)
        if not drawn:
            obj = rates_from_cross_gains(
                g_base, sc.noise_power).mean(axis=0)
            return self._pick(obj, valid, grid)
        gen_est = rng.child(_PATH_EST).generator()
        e_num = spec.outer_samples
        w_drawn = np.zeros((e_num, len(grid)) + x.shape, dtype=complex)
        for ell in drawn:
            xs = self.models[n].sample_estimate_given(ell, x, e_num, gen_est)
            w_ell, v_ell = self._batched_rzf_sum(xs, grid, [ell])
            w_drawn += w_ell
            valid = valid & v_ell.all(axis=0)
        g_drawn = _gemm_gains(hs, w_drawn)
        g_drawn += g_base[:, None]
        obj = rates_from_cross_gains(g_drawn, sc.noise_power).mean(axis=(0, 1))
        return self._pick(obj, valid, grid)

    def _require_two_tx_perfect_last(self, spec: StrategySpec):
        sc = self.scenario
        if sc.num_tx != 2 or sc.csi_quality[1] != 0.0:
            raise CapabilityError(
                "the optimal approach is implemented only for 2 TXs with "
                "perfect CSI at TX 2")
        del spec

    def decide_optimal_tx1(self, draw: ChannelDraw, spec: StrategySpec,
                           rng: RngStream) -> tuple[float, float]:
        """Hierarchical optimal decision of TX 1: for every candidate alpha,
        average over channel draws the best response of TX 2 (which sees the
        true channel) on the shared grid."""
        self._require_two_tx_perfect_last(spec)
        sc = self.scenario
        grid = spec.alpha_grid
        x1 = draw.estimates[0]
        hs = self.models[0].sample_h_given(
            x1, spec.inner_samples, rng.child(_PATH_H).generator())
        w1, v1 = self._candidate(x1, grid, [0])
        w2, v2 = self._batched_rzf_sum(hs, grid, [1])   # TX 2 reacts to H_s
        t1 = _gemm_gains(hs, w1)
        t2 = _paired_gains(hs, w2)
        r = rates_from_cross_gains(t1[:, :, None] + t2[:, None, :],
                                   sc.noise_power)        # (S, A1, A2)
        r = np.where(v2[:, None, :], r, -np.inf)
        obj = r.max(axis=2).mean(axis=0)
        return self._pick(obj, v1, grid)

    def _decide_optimal_nonhier_tx1(self, draw: ChannelDraw,
                                    spec: StrategySpec, rng: RngStream
                                    ) -> tuple[float, float]:
        """Non-hierarchical optimal decision of TX 1: TX 2's estimate is
        drawn from its conditional law instead of being tied to the channel
        draw used in the inner expectation."""
        self._require_two_tx_perfect_last(spec)
        sc = self.scenario
        grid = spec.alpha_grid
        x1 = draw.estimates[0]
        hs = self.models[0].sample_h_given(
            x1, spec.inner_samples, rng.child(_PATH_H).generator())
        xs2 = self.models[0].sample_estimate_given(
            1, x1, spec.outer_samples, rng.child(_PATH_EST).generator())
        w1, v1 = self._candidate(x1, grid, [0])
        w2, v2 = self._batched_rzf_sum(xs2, grid, [1])   # (E, A, M, K)
        t1 = _gemm_gains(hs, w1)
        t2 = _gemm_gains(hs, w2)
        obj = np.empty(len(grid))
        for a1 in range(len(grid)):
            r = rates_from_cross_gains(
                t1[:, None, None, a1] + t2, sc.noise_power)  # (S, E, A2)
            r = np.where(v2, r.mean(axis=0), -np.inf)        # (E, A2)
            obj[a1] = r.max(axis=1).mean()
        return self._pick(obj, v1, grid)

    def _decide_optimal_nonhier_tx2(self, draw: ChannelDraw,
                                    spec: StrategySpec, rng: RngStream
                                    ) -> tuple[float, float]:
        """Non-hierarchical optimal decision of TX 2 (perfect CSI): averages
        over draws of TX 1's estimate the best TX 1 response on the grid."""
        self._require_two_tx_perfect_last(spec)
        sc = self.scenario
        grid = spec.alpha_grid
        h = draw.true_channel
        xs1 = self.models[1].sample_estimate_given(
            0, h, spec.outer_samples, rng.child(_PATH_EST).generator())
        w1, v1 = self._batched_rzf_sum(xs1, grid, [0])   # (E, A, M, K)
        w2, v2 = self._candidate(h, grid, [1])
        t1 = _gemm_gains(h, w1)
        t2 = _gemm_gains(h, w2)
        r = rates_from_cross_gains(
            t1[:, :, None] + t2[None, None, :], sc.noise_power)  # (E, A1, A2)
        r = np.where(v1[:, :, None], r, -np.inf)
        obj = r.max(axis=1).mean(axis=0)
        return self._pick(obj, v2, grid)

    def _decide_perfect(self, draw: ChannelDraw, spec: StrategySpec
                        ) -> tuple[float, float]:
        """Single shared alpha maximizing the true sum rate with all blocks
        built from the true channel."""
        grid = spec.alpha_grid
        h = draw.true_channel
        wc, valid = self._candidate(h, grid, range(self.scenario.num_tx))
        g = _gemm_gains(h, wc)
        obj = rates_from_cross_gains(g, self.scenario.noise_power)
        return self._pick(obj, valid, grid)

    # ----- team run ---------------------------------------------------------

    def run_team(self, draw: ChannelDraw, spec: StrategySpec, rng: RngStream
                 ) -> TeamDecision:
        sc = self.scenario
        if spec.approach == PERFECT_CENTRALIZED:
            alpha, val = self._decide_perfect(draw, spec)
            blocks = [rzf_block(draw.true_channel, alpha, n, sc)
                      for n in range(sc.num_tx)]
            return TeamDecision(alphas=(alpha,) * sc.num_tx,
                                precoder=assemble(blocks),
                                objective_values=(val,) * sc.num_tx)

        alphas: list[float] = []
        values: list[float] = []
        if spec.approach == OPTIMAL:
            self._require_two_tx_perfect_last(spec)
            if spec.hierarchy == HIERARCHICAL:
                a1, v1 = self.decide_optimal_tx1(draw, spec,
                                                 rng.child(_PATH_TX, 0))
                # TX 2 sees the true channel and TX 1's actual block, so its
                # optimal step coincides with the hierarchical naive decision.
                a2, v2 = self.decide_naive(1, draw, [a1], spec)
            else:
                a1, v1 = self._decide_optimal_nonhier_tx1(
                    draw, spec, rng.child(_PATH_TX, 0))
                a2, v2 = self._decide_optimal_nonhier_tx2(
                    draw, spec, rng.child(_PATH_TX, 1))
            alphas, values = [a1, a2], [v1, v2]
        else:
            for n in range(sc.num_tx):
                rng_n = rng.child(_PATH_TX, n)
                if spec.approach == NAIVE:
                    a, v = self.decide_naive(n, draw, alphas, spec)
                elif spec.approach == LOCALLY_ROBUST:
                    a, v = self.decide_locally_robust(n, draw, alphas, spec,
                                                      rng_n)
                else:
                    a, v = self.decide_globally_robust(n, draw, alphas, spec,
                                                       rng_n)
                alphas.append(a)
                values.append(v)

        blocks = [rzf_block(draw.estimates[n], alphas[n], n, sc)
                  for n in range(sc.num_tx)]
        return TeamDecision(alphas=tuple(alphas), precoder=assemble(blocks),
                            objective_values=tuple(values))


# ----- module-level operation wrappers --------------------------------------

_ENGINES: dict[int, StrategyEngine] = {}


def _engine(scenario: Scenario) -> StrategyEngine:
    key = id(scenario)
    if key not in _ENGINES:
        if len(_ENGINES) > 64:
            _ENGINES.clear()
        _ENGINES[key] = StrategyEngine(scenario)
    return _ENGINES[key]


def alpha_naive(n: int, draw: ChannelDraw, prior_alphas, spec: StrategySpec,
                scenario: Scenario) -> float:
    return _engine(scenario).decide_naive(n, draw, prior_alphas, spec)[0]


def alpha_locally_robust(n: int, draw: ChannelDraw, prior_alphas,
                         spec: StrategySpec, scenario: Scenario,
                         rng: RngStream) -> float:
    return _engine(scenario).decide_locally_robust(
        n, draw, prior_alphas, spec, rng)[0]


def alpha_globally_robust(n: int, draw: ChannelDraw, prior_alphas,
                          spec: StrategySpec, scenario: Scenario,
                          rng: RngStream) -> float:
    return _engine(scenario).decide_globally_robust(
        n, draw, prior_alphas, spec, rng)[0]


def alpha_optimal_2tx(draw: ChannelDraw, spec: StrategySpec,
                      scenario: Scenario, rng: RngStream
                      ) -> tuple[float, float]:
    eng = _engine(scenario)
    a1, _ = eng.decide_optimal_tx1(draw, spec, rng.child(_PATH_TX, 0))
    a2, _ = eng.decide_naive(1, draw, [a1], spec)
    return a1, a2


def run_team(draw: ChannelDraw, spec: StrategySpec, scenario: Scenario,
             rng: RngStream) -> TeamDecision:
    return _engine(scenario).run_team(draw, spec, rng)
